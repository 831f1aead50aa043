#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "saw/boundary.hpp"

namespace testing_support {

inline saw::Box square(double lo, double hi, int n = 2) {
  saw::Box b;
  b.n = n;
  for (int i = 0; i < n; ++i) {
    b.lo[i] = lo;
    b.hi[i] = hi;
  }
  return b;
}

inline saw::Box cantor_window() {
  saw::Box b;
  b.n = 2;
  b.lo = {-0.5, -1.0, 0.0, 0.0};
  b.hi = {1.5, 1.0, 0.0, 0.0};
  return b;
}

inline saw::BoundaryPtr flat_line(const saw::Box& w, int n = 2) {
  return std::make_shared<saw::AffineBoundary>(n, 1, w);
}

inline saw::BoundaryPtr cantor(int depth = 12, const saw::Box& w = cantor_window()) {
  return std::make_shared<saw::CantorBoundary>(2, 2, 1.0 / 3.0, "point", depth, w);
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sawtooth-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
