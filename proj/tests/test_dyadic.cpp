#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "saw/dyadic.hpp"

using namespace saw;
using namespace testing_support;

namespace {

std::shared_ptr<const DyadicTree> cantor_tree(int leaf = 8) {
  return std::make_shared<DyadicTree>(DyadicTree::build(cantor(12), 0, leaf));
}

std::vector<double> random_vector(std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> f(m);
  for (double& v : f) v = uniform(rng, -1.0, 1.0);
  return f;
}

}  // namespace

TEST_SUITE("dyadic") {
  TEST_CASE("generations partition the atoms and nest") {
    auto t = cantor_tree();
    for (int k = t->k_min(); k <= t->k_max(); ++k) {
      std::vector<int> hits(t->atom_count(), 0);
      for (int q : t->generation(k))
        for (int a = t->cube(q).begin; a < t->cube(q).end; ++a) ++hits[a];
      CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
      if (k > t->k_min())
        for (int q : t->generation(k)) CHECK(t->contains(t->cube(q).parent, q));
    }
    for (int a = 0; a < t->atom_count(); a += 7)
      CHECK(t->contains(t->cube_of(a, t->k_min()), t->cube_of(a, t->k_max())));
  }

  TEST_CASE("grid axioms hold on the Cantor set") {
    auto t = cantor_tree(10);
    GridReport rep = verify_grid(*t);
    CHECK(rep.ok());
    CHECK(rep.zeta > 0.0);
  }

  TEST_CASE("cube masses add up from children") {
    auto t = cantor_tree();
    for (const Cube& c : t->cubes()) {
      if (c.n_children == 0) continue;
      double s = 0.0;
      for (int j = 0; j < c.n_children; ++j) s += t->cube(c.first_child + j).mass;
      CHECK(s == doctest::Approx(c.mass).epsilon(1e-12));
    }
  }

  TEST_CASE("projection is idempotent, mass preserving and self-adjoint") {
    auto t = cantor_tree();
    const auto& mu = t->atom_masses();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Family F = random_family(*t, 0.2, seed);
      auto f = random_vector(t->atom_count(), seed);
      auto g = random_vector(t->atom_count(), seed + 100);
      auto Pf = project_function(*t, F, f);
      auto PPf = project_function(*t, F, Pf);
      for (int a = 0; a < t->atom_count(); ++a) CHECK(PPf[a] == doctest::Approx(Pf[a]).epsilon(1e-12));
      auto Pg = project_function(*t, F, g);
      double lhs = 0.0, rhs = 0.0, m0 = 0.0, m1 = 0.0;
      for (int a = 0; a < t->atom_count(); ++a) {
        lhs += Pf[a] * g[a] * mu[a];
        rhs += f[a] * Pg[a] * mu[a];
        m0 += f[a] * mu[a];
        m1 += Pf[a] * mu[a];
      }
      CHECK(std::abs(lhs - rhs) <= 1e-12);
      CHECK(std::abs(m0 - m1) <= 1e-12);
      for (double p : {1.0, 2.0, double(INFINITY)}) CHECK(lp_norm(Pf, mu, p) <= lp_norm(f, mu, p) * (1 + 1e-12));
    }
  }

  TEST_CASE("projected measure keeps total mass") {
    auto t = cantor_tree();
    Family F = random_family(*t, 0.3, 4);
    auto w = random_vector(t->atom_count(), 8);
    for (double& v : w) v = std::abs(v);
    auto Pw = project_measure(*t, F, w);
    double a = 0.0, b = 0.0;
    for (int i = 0; i < t->atom_count(); ++i) {
      a += w[i];
      b += Pw[i];
    }
    CHECK(a == doctest::Approx(b).epsilon(1e-13));
  }

  TEST_CASE("random families are disjoint canonical cubes") {
    auto t = cantor_tree();
    Family F = random_family(*t, 0.25, 17);
    const auto& c = F.cubes();
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = i + 1; j < c.size(); ++j) {
        CHECK_FALSE(t->contains(c[i], c[j]));
        CHECK_FALSE(t->contains(c[j], c[i]));
      }
  }

  TEST_CASE("stopping cubes are maximal with average above the threshold") {
    auto t = cantor_tree();
    const auto& mu = t->atom_masses();
    std::vector<double> f(t->atom_count());
    for (int a = 0; a < t->atom_count(); ++a) f[a] = std::pow(std::abs(t->atom(a)[0] - 0.3) + 1e-3, -0.5);
    int q0 = t->generation(t->k_min()).front();
    double tau = 2.0 * cube_average(*t, q0, f, mu);
    StoppingResult res = cz_stopping(*t, f, mu, tau, q0);
    REQUIRE(!res.family.empty());
    for (int q : res.family.cubes()) {
      CHECK(cube_average(*t, q, f, mu) > tau);
      int p = t->cube(q).parent;
      while (p >= 0 && t->cube(p).canonical == t->cube(q).canonical) p = t->cube(p).parent;
      if (p >= 0 && t->contains(q0, p)) CHECK(cube_average(*t, p, f, mu) <= tau);
    }
  }

  TEST_CASE("tree mode names parse") {
    CHECK(parse_tree_mode("nets") == TreeMode::Nets);
    CHECK(parse_tree_mode("standard") == TreeMode::Standard);
    CHECK(parse_tree_mode("self-similar") == TreeMode::SelfSimilar);
    CHECK_THROWS_AS(parse_tree_mode("octree"), ConfigError);
  }
}
