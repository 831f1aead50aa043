#include <doctest.h>

#include "helpers.hpp"
#include "saw/sawtooth.hpp"

using namespace saw;
using namespace testing_support;

namespace {

struct Setup {
  std::shared_ptr<const DyadicTree> tree;
  std::shared_ptr<const WhitneyGrid> grid;
  std::shared_ptr<const RegionSets> regions;
};

const Setup& setup() {
  static const Setup s = [] {
    Setup r;
    auto g = cantor(12);
    r.tree = std::make_shared<DyadicTree>(DyadicTree::build(g, 0, 7));
    WhitneyOptions opt;
    opt.k_leaf = 9;
    r.grid = std::make_shared<WhitneyGrid>(WhitneyGrid::decompose(g, cantor_window(), opt));
    r.regions = RegionSets::build(r.tree, r.grid);
    return r;
  }();
  return s;
}

}  // namespace

TEST_SUITE("sawtooth") {
  TEST_CASE("region constants are positive and ordered") {
    const RegionConstants& k = setup().regions->constants();
    CHECK(k.a0 > 0.0);
    CHECK(k.A0 >= k.a0);
    CHECK(k.eta > 0.0);
    CHECK(k.eta < k.ck);
    CHECK(k.K >= 500.0 * k.A0 / k.a0 - 1e-9);
    CHECK(k.a2 <= k.A2);
    CHECK(k.c1 > 0.0);
    CHECK(k.M0 == doctest::Approx(125.0 * k.A0 * k.A0 / (k.ck * k.ck)));
  }

  TEST_CASE("W_Q^0 is contained in W_Q") {
    const auto& s = setup();
    for (int q : s.tree->generation(3)) {
      auto w0 = s.regions->list_w0(q);
      auto w = s.regions->list_w(q);
      std::sort(w.begin(), w.end());
      for (std::size_t b : w0) CHECK(std::binary_search(w.begin(), w.end(), b));
    }
  }

  TEST_CASE("empty family gives the whole domain without Sigma faces") {
    const auto& s = setup();
    SawtoothDomain dom = SawtoothDomain::build(s.regions, parse_family(*s.tree, "none", 1));
    CHECK(dom.stats().sigma_faces == 0);
    CHECK(!dom.empty());
  }

  TEST_CASE("larger families give smaller sawtooth domains") {
    const auto& s = setup();
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      Family big = random_family(*s.tree, 0.2, seed);
      std::vector<int> half(big.cubes().begin(), big.cubes().begin() + big.cubes().size() / 2);
      Family small(*s.tree, half);
      SawtoothDomain a = SawtoothDomain::build(s.regions, small);
      SawtoothDomain b = SawtoothDomain::build(s.regions, big);
      std::size_t violations = 0;
      for (std::size_t id = 0; id < s.grid->size(); ++id)
        if (b.cell_in(id) && !a.cell_in(id)) ++violations;
      CHECK(violations == 0);
    }
  }

  TEST_CASE("family parser") {
    const auto& s = setup();
    CHECK(parse_family(*s.tree, "none", 1).empty());
    CHECK(!parse_family(*s.tree, "random p=0.3", 1).empty());
    CHECK_THROWS_AS(parse_family(*s.tree, "random p=2", 1), ConfigError);
    CHECK_THROWS_AS(parse_family(*s.tree, "greedy", 1), ConfigError);
  }

  TEST_CASE("sigma star splits into Gamma and Sigma parts") {
    const auto& s = setup();
    SawtoothDomain dom = SawtoothDomain::build(s.regions, random_family(*s.tree, 0.15, 3));
    std::mt19937_64 rng(2);
    for (int k = 0; k < 20; ++k) {
      Point x = dom.sample_boundary(rng, k % 2 == 1);
      double r = 0.05 + 0.2 * uniform01(rng);
      CHECK(dom.star_ball(x, r) == doctest::Approx(dom.star_gamma(x, r) + dom.star_sigma(x, r)));
      CHECK(dom.star_ball(x, r) > 0.0);
    }
  }
}
