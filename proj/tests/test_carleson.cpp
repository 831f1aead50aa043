#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "saw/carleson.hpp"

using namespace saw;
using namespace testing_support;

namespace {

Json oscillatory(double eps) {
  return {{"base", "identity"},
          {"perturbation", {{"kind", "oscillatory"}, {"eps", eps}, {"frequency", 6.0}, {"matrix", {{0.0, 1.0}, {-0.5, 0.0}}}}}};
}

}  // namespace

TEST_SUITE("carleson") {
  TEST_CASE("operator norm of small matrices") {
    Mat A = Mat::Zero();
    A(0, 0) = 3.0;
    A(1, 1) = -1.0;
    CHECK(operator_norm(A, 2) == doctest::Approx(3.0));
    A = Mat::Zero();
    A(0, 1) = 2.0;
    CHECK(operator_norm(A, 2) == doctest::Approx(2.0));
  }

  TEST_CASE("disagreement of zero and constant perturbations") {
    Box w = square(-1, 1);
    auto g = flat_line(w);
    MatrixField A0 = make_field(Json{{"base", "identity"}}, 2, g);
    CHECK(disagreement(A0, *g, {0.2, 0.4, 0, 0}) == 0.0);
    MatrixField A1 = make_field(Json{{"base", "identity"}, {"perturbation", {{"kind", "constant"}, {"eps", 0.1}}}}, 2, g);
    CHECK(disagreement(A1, *g, {0.2, 0.4, 0, 0}) == doctest::Approx(0.1));
  }

  TEST_CASE("perturbation sup over a ball dominates samples") {
    Box w = square(-1, 1);
    auto g = flat_line(w);
    MatrixField A = make_field(oscillatory(0.2), 2, g);
    Point X{0.3, 0.5, 0, 0};
    double sup = A.pert.sup_ball(X, 0.25, 2) * A.pert.matrix_norm();
    CHECK(disagreement_sampled(A, *g, X, 256) <= sup + 1e-12);
    CHECK(disagreement(A, *g, X) <= sup + 1e-12);
  }

  TEST_CASE("discrete and continuous norms scale like eps squared") {
    auto g = cantor(12);
    auto tree = std::make_shared<DyadicTree>(DyadicTree::build(g, 0, 6));
    WhitneyOptions opt;
    opt.k_leaf = 8;
    auto grid = std::make_shared<WhitneyGrid>(WhitneyGrid::decompose(g, cantor_window(), opt));
    auto R = RegionSets::build(tree, grid);
    MatrixField A = make_field(oscillatory(0.05), 2, g);
    DiscreteCarleson D1 = DiscreteCarleson::build(*R, A);
    DiscreteCarleson D2 = DiscreteCarleson::build(*R, A.scaled(3.0));
    double n1 = D1.norm(*tree), n2 = D2.norm(*tree);
    REQUIRE(n1 > 0.0);
    CHECK(std::abs(n2 / n1 - 9.0) <= 1e-12 * 9.0);
    auto plan = carleson_ball_plan(*tree, R->constants(), {1, 2});
    ContinuousNorm C1 = continuous_norm(A, *grid, *tree, plan);
    ContinuousNorm C2 = continuous_norm(A.scaled(3.0), *grid, *tree, plan);
    CHECK(std::abs(C2.norm / C1.norm - 9.0) <= 1e-12 * 9.0);
    CHECK(n1 <= comparison_constant(R->constants()) * C1.norm);
  }

  TEST_CASE("comparison constant formula") {
    RegionConstants k;
    k.n = 2;
    k.d = 1.0;
    k.A2 = 3.0;
    k.a0 = 0.5;
    k.cd = 2.0;
    double expect = std::pow(41.0 * std::sqrt(2.0), 1.0) * std::pow(7.0 * std::sqrt(2.0) * 3.0 / 0.5, 1.0) * 4.0;
    CHECK(comparison_constant(k) == doctest::Approx(expect));
  }

  TEST_CASE("field parsing errors are config errors") {
    Box w = square(-1, 1);
    auto g = flat_line(w);
    CHECK_THROWS_AS(make_field(Json{{"base", "random"}}, 2, g), ConfigError);
    CHECK_THROWS_AS(make_field(Json{{"perturbation", {{"kind", "spiral"}}}}, 2, g), ConfigError);
    MatrixField A = make_field(Json{{"base", "constant"}, {"matrix", {{1.0, 0.3}, {-0.2, 1.0}}}}, 2, g);
    CHECK_FALSE(A.symmetric());
    CHECK(A.ellipticity(w, 100, 1) >= 1.0);
  }
}
