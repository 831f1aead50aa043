#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "saw/boundary.hpp"

using namespace saw;
using namespace testing_support;

TEST_SUITE("boundary") {
  TEST_CASE("affine distance and nearest point match the orthogonal projection") {
    Box w = square(-2, 2, 3);
    AffineBoundary g(3, 1, w);
    std::mt19937_64 rng(3);
    for (int k = 0; k < 200; ++k) {
      Point x{uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2), 0};
      CHECK(g.distance(x) == doctest::Approx(std::hypot(x[1], x[2])).epsilon(1e-14));
      Point y = g.nearest(x);
      CHECK(y[0] == doctest::Approx(x[0]));
      CHECK(y[1] == 0.0);
      CHECK(y[2] == 0.0);
    }
  }

  TEST_CASE("affine ball mass is the d-volume of a d-ball") {
    Box w = square(-4, 4, 3);
    AffineBoundary g(3, 2, w);
    for (double r : {0.1, 0.5, 1.0}) CHECK(g.ball_mass({0, 0, 0, 0}, r) == doctest::Approx(M_PI * r * r));
    // Centre off the plane at height h: a disc of radius sqrt(r^2 - h^2).
    CHECK(g.ball_mass({0, 0, 0.3, 0}, 0.5) == doctest::Approx(M_PI * (0.25 - 0.09)));
  }

  TEST_CASE("middle-thirds Cantor set: distances, masses and self-similarity") {
    auto g = cantor(12);
    const auto& c = static_cast<const CantorBoundary&>(*g);
    for (double t : {0.0, 1.0, 1.0 / 3.0, 2.0 / 3.0, 2.0 / 9.0, 7.0 / 9.0}) CHECK(c.dist1(t) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(c.dist1(0.5) == doctest::Approx(1.0 / 6.0));
    CHECK(c.dist1(-0.25) == doctest::Approx(0.25));
    CHECK(c.mass1(-1.0, 2.0) == doctest::Approx(1.0));
    CHECK(c.mass1(-1.0, 0.5) == doctest::Approx(0.5));
    // mu([0, x/3]) = mu([0, x]) / 2.
    std::mt19937_64 rng(5);
    for (int k = 0; k < 50; ++k) {
      double x = uniform01(rng);
      CHECK(c.mass1(-1.0, x / 3.0) == doctest::Approx(0.5 * c.mass1(-1.0, x)).epsilon(1e-9));
    }
    CHECK(c.d() == doctest::Approx(std::log(2.0) / std::log(3.0)));
  }

  TEST_CASE("Cantor nearest point is on the set and realises the distance") {
    auto g = cantor(12);
    std::mt19937_64 rng(9);
    for (int k = 0; k < 100; ++k) {
      Point x{uniform(rng, -0.5, 1.5), uniform(rng, -1, 1), 0, 0};
      Point y = g->nearest(x);
      CHECK(dist(x, y, 2) == doctest::Approx(g->distance(x)).epsilon(1e-12));
      CHECK(g->distance(y) <= 1e-12);
    }
  }

  TEST_CASE("ADR estimate of a flat line is tight") {
    Box w = square(-4, 4);
    auto g = flat_line(w);
    auto plan = adr_sample_plan(*g, 120, 1.0, 4, 11);
    AdrReport rep = adr_estimate(*g, plan);
    CHECK(rep.sup_ratio <= 2.0 + 1e-9);
    CHECK(rep.inf_ratio >= 2.0 - 1e-9);
    CHECK(rep.band_violations == 0);
  }

  TEST_CASE("corkscrew point of a flat line sits at half radius") {
    Box w = square(-4, 4);
    auto g = flat_line(w);
    Corkscrew cs = corkscrew_point(*g, {0, 0, 0, 0}, 1.0);
    CHECK(cs.c >= 0.45);
    CHECK(g->distance(cs.X) >= 0.45);
    CHECK(norm(cs.X, 2) <= 1.0);
  }

  TEST_CASE("Harnack chain balls stay away from the boundary") {
    auto g = cantor(12);
    Point X1{0.1, 0.3, 0, 0}, X2{0.9, 0.3, 0, 0};
    HarnackChain ch = harnack_chain(*g, X1, X2, 0.3, 4.0);
    REQUIRE(!ch.balls.empty());
    for (const Ball& b : ch.balls) CHECK(b.radius < g->distance(b.center));
  }

  TEST_CASE("factory rejects unknown kinds with a config error") {
    Box w = square(-1, 1);
    CHECK_THROWS_AS(make_boundary(Json{{"kind", "sphere"}}, 2, w), ConfigError);
    auto g = make_boundary(Json{{"kind", "cantor"}, {"params", {{"depth", 8}}}}, 2, w);
    CHECK(g->kind() == "cantor");
  }
}
