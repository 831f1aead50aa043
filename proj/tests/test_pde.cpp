#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "saw/distance_fn.hpp"
#include "saw/pde.hpp"

using namespace saw;
using namespace testing_support;

namespace {

SystemPtr flat_system(int cells, const Json& op = Json{{"base", "identity"}}) {
  Box w = square(-1, 1);
  auto g = flat_line(w);
  return DiscreteSystem::assemble(Grid::build(g, w, cells), make_field(op, 2, g));
}

struct CantorSetup {
  std::shared_ptr<const DyadicTree> tree;
  SystemPtr sys;
};

const CantorSetup& cantor_setup() {
  static const CantorSetup s = [] {
    CantorSetup r;
    auto g = cantor(12);
    r.tree = std::make_shared<DyadicTree>(DyadicTree::build(g, 0, 6));
    r.sys = DiscreteSystem::assemble(Grid::build(g, cantor_window(), 64), make_field(Json{{"base", "identity"}}, 2, g));
    return r;
  }();
  return s;
}

}  // namespace

TEST_SUITE("pde") {
  TEST_CASE("flat regularized distance is a constant multiple of delta") {
    for (int n : {2, 3}) {
      Box w = square(-2, 2, n);
      auto g = flat_line(w, n);
      for (double alpha : {0.5, 1.0, 2.0}) {
        // ∫_R (t^2 + y^2)^(-(1+alpha)/2) dy = t^-alpha sqrt(pi) Gamma(alpha/2) / Gamma((1+alpha)/2).
        double c = std::sqrt(M_PI) * std::tgamma(alpha / 2) / std::tgamma((1 + alpha) / 2);
        RegularizedDistance D(g, alpha);
        for (double t : {0.05, 0.3, 1.0}) {
          Point X{0.2, t, 0, 0};
          CHECK(D(X) / t == doctest::Approx(std::pow(c, -1.0 / alpha)).epsilon(1e-6));
        }
      }
    }
  }

  TEST_CASE("constant data gives the constant solution") {
    auto sys = flat_system(64);
    auto data = dirichlet_data(sys->grid(), [](const Point&) { return 1.0; }, 1.0);
    DiscreteSolution sol = solve_dirichlet(*sys, data);
    for (std::size_t id : sys->grid().interior()) CHECK(std::abs(sol.u[id] - 1.0) <= 1e-9);
    CHECK(sol.mp_ok);
  }

  TEST_CASE("reflection symmetry across the line") {
    auto sys = flat_system(64);
    const Grid& G = sys->grid();
    auto data = dirichlet_data(G, [](const Point& y) { return std::exp(-4 * y[0] * y[0]) + 0.5 * y[0]; }, 0.0);
    DiscreteSolution sol = solve_dirichlet(*sys, data);
    double worst = 0.0;
    for (std::size_t id = 0; id < G.size(); ++id) {
      CellIndex c = G.coords(id);
      CellIndex m = c;
      m[1] = G.N() - 1 - c[1];
      worst = std::max(worst, std::abs(sol.u[id] - sol.u[G.index(m)]));
    }
    CHECK(worst <= 1e-8);
  }

  TEST_CASE("maximum principle on random data, symmetric and non-symmetric") {
    for (const Json& op : {Json{{"base", "identity"}}, Json{{"base", "smooth"}, {"amp", 0.4}}}) {
      auto sys = flat_system(48, op);
      std::mt19937_64 rng(21);
      for (int k = 0; k < 5; ++k) {
        std::vector<double> data(sys->grid().dirichlet().size());
        for (double& v : data) v = uniform(rng, -1.0, 1.0);
        DiscreteSolution sol = solve_dirichlet(*sys, data);
        CHECK(sol.mp_ok);
      }
    }
  }

  TEST_CASE("adjoint harmonic measure equals the per-cube computation") {
    const auto& s = cantor_setup();
    Point X0{0.5, 0.4, 0, 0};
    HarmonicMeasure a = harmonic_measure(*s.sys, *s.tree, X0, 3, true);
    HarmonicMeasure b = harmonic_measure(*s.sys, *s.tree, X0, 3, false);
    REQUIRE(a.omega.size() == b.omega.size());
    for (std::size_t k = 0; k < a.omega.size(); ++k) CHECK(std::abs(a.omega[k] - b.omega[k]) <= 1e-8);
    CHECK(std::abs(a.leakage - b.leakage) <= 1e-8);
    CHECK(std::abs(a.total - 1.0) <= 1e-8);
  }

  TEST_CASE("harmonic measure is additive over children") {
    const auto& s = cantor_setup();
    HarmonicMeasure hm = harmonic_measure(*s.sys, *s.tree, {0.5, 0.4, 0, 0}, 4);
    for (int q : s.tree->generation(2)) {
      const Cube& c = s.tree->cube(q);
      double sum = 0.0;
      for (int j = 0; j < c.n_children; ++j) sum += hm.of_cube(*s.tree, c.first_child + j);
      CHECK(sum == doctest::Approx(hm.of_cube(*s.tree, q)).epsilon(1e-12));
    }
  }

  TEST_CASE("reverse Holder characteristic of a constant kernel is one") {
    const auto& s = cantor_setup();
    const auto& cubes = s.tree->generation(4);
    std::vector<double> sigma, omega;
    for (int q : cubes) {
      sigma.push_back(s.tree->cube(q).mass);
      omega.push_back(3.0 * s.tree->cube(q).mass);
    }
    RhReport rh = rh_characteristic(*s.tree, cubes, omega, sigma, s.tree->generation(0).front(), 2.0);
    CHECK(rh.characteristic == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("cone functionals of a constant field") {
    const auto& s = cantor_setup();
    std::vector<double> u(s.sys->grid().size(), 1.0);
    ConeFunctionals cf = nt_and_square(s.sys->grid(), u, *s.tree, 3, 1.0);
    for (std::size_t k = 0; k < cf.cubes.size(); ++k) {
      if (cf.empty[k]) continue;
      CHECK(cf.S[k] == 0.0);
      CHECK(cf.N[k] == doctest::Approx(1.0));
    }
  }

  TEST_CASE("wider cones see larger functionals") {
    const auto& s = cantor_setup();
    auto data = dirichlet_data(s.sys->grid(), [](const Point& y) { return y[0]; }, 0.0);
    DiscreteSolution sol = solve_dirichlet(*s.sys, data);
    ConeFunctionals narrow = nt_and_square(s.sys->grid(), sol.u, *s.tree, 3, 1.0);
    ConeFunctionals wide = nt_and_square(s.sys->grid(), sol.u, *s.tree, 3, 2.0);
    for (std::size_t k = 0; k < narrow.cubes.size(); ++k) {
      CHECK(wide.N[k] >= narrow.N[k]);
      CHECK(wide.S[k] >= narrow.S[k]);
    }
  }

  TEST_CASE("Green function is symmetric for symmetric operators and positive") {
    auto sys = flat_system(48);
    Point X{0.3, 0.4, 0, 0}, Y{-0.4, -0.2, 0, 0};
    GreenField gX = green_function(*sys, X);
    GreenField gY = green_function(*sys, Y);
    const Grid& G = sys->grid();
    double a = gX.g[interior_cell(G, Y)], b = gY.g[interior_cell(G, X)];
    CHECK(a == doctest::Approx(b).epsilon(1e-9));
    CHECK(gX.min_value >= 0.0);
  }

  TEST_CASE("Green function of the transposed operator") {
    auto sys = flat_system(48, Json{{"base", "smooth"}, {"amp", 0.4}});
    CHECK_FALSE(sys->symmetric());
    Point X{0.3, 0.4, 0, 0}, Y{-0.4, -0.2, 0, 0};
    GreenField g = green_function(*sys, X);
    GreenField gt = green_function(*sys, Y, true);
    const Grid& G = sys->grid();
    CHECK(g.g[interior_cell(G, Y)] == doctest::Approx(gt.g[interior_cell(G, X)]).epsilon(1e-9));
  }

  TEST_CASE("discrete difference identity is exact and rejects a perturbed pole") {
    Box w = square(-1, 1);
    auto g = flat_line(w);
    GridPtr G = Grid::build(g, w, 32);
    Json op{{"base", "identity"},
            {"perturbation", {{"kind", "bump"}, {"eps", 0.2}, {"radius", 0.2}, {"center", {-0.4, 0.4}}}}};
    auto s0 = DiscreteSystem::assemble(G, make_field(Json{{"base", "identity"}}, 2, g));
    auto s1 = DiscreteSystem::assemble(G, make_field(op, 2, g));
    auto data = dirichlet_data(s0->grid(), [](const Point& y) { return y[0]; }, 0.0);
    DifferenceCheck chk = difference_identity_check(*s0, *s1, data, {0.4, 0.4, 0, 0});
    CHECK(std::abs(chk.lhs - chk.discrete_rhs) <= 1e-9 * std::max(1.0, std::abs(chk.lhs)));
    CHECK_THROWS_AS(difference_identity_check(*s0, *s1, data, {-0.4, 0.4, 0, 0}), ConfigError);
  }
}
