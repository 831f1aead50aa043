#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "saw/whitney.hpp"

using namespace saw;
using namespace testing_support;

namespace {

// Distance from a box to the x0-axis in the plane.
double box_to_line(const Box& b) {
  if (b.lo[1] <= 0.0 && 0.0 <= b.hi[1]) return 0.0;
  return std::min(std::abs(b.lo[1]), std::abs(b.hi[1]));
}

}  // namespace

TEST_SUITE("whitney") {
  TEST_CASE("flat line: every box obeys the distance band and the cells tile the window") {
    Box w = square(-4, 4);
    auto g = flat_line(w);
    WhitneyOptions opt;
    opt.k_leaf = 8;
    WhitneyGrid grid = WhitneyGrid::decompose(g, w, opt);
    double volume = 0.0;
    for (const WhitneyBox& b : grid.boxes()) {
      Box B = b.box(2);
      volume += B.volume();
      if (b.collar) continue;
      double dd = box_to_line(B);
      CHECK(dd == doctest::Approx(b.dist).epsilon(1e-12));
      CHECK(4.0 * B.diam() <= dd);
      CHECK(dd <= 40.0 * B.diam());
    }
    CHECK(std::abs(volume - w.volume()) / w.volume() < 1e-12);
    WhitneyReport rep = verify_whitney(grid);
    CHECK(rep.ok());
    CHECK(rep.min_ratio >= 0.25);
    CHECK(rep.max_ratio <= 4.0);
  }

  TEST_CASE("box lookup is consistent with containment") {
    Box w = square(-1, 1);
    WhitneyOptions opt;
    opt.k_leaf = 7;
    WhitneyGrid grid = WhitneyGrid::decompose(cantor(10, w), w, opt);
    for (std::size_t id = 0; id < grid.size(); id += 5) {
      Point c = grid.at(id).box(2).center();
      CHECK(grid.box_containing(c) == static_cast<long>(id));
      for (std::size_t j : grid.touching(id)) CHECK(grid.at(id).box(2).distance_to(grid.at(j).box(2)) == 0.0);
    }
  }

  TEST_CASE("Cantor set decomposition verifies") {
    Box w = cantor_window();
    WhitneyOptions opt;
    opt.k_leaf = 8;
    WhitneyGrid grid = WhitneyGrid::decompose(cantor(12), w, opt);
    CHECK(verify_whitney(grid).ok());
  }

  TEST_CASE("window alignment") {
    CHECK(window_alignment(square(-4, 4)) == -2);
    CHECK(window_alignment(cantor_window()) == 1);
    CHECK(window_alignment(square(-0.125, 0.25)) == 3);
  }
}
