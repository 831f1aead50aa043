#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace saw {

inline constexpr int kMaxDim = 4;

// Points live in R^n with n <= 4; unused trailing coordinates stay zero.
using Point = std::array<double, kMaxDim>;
using Json = nlohmann::ordered_json;

inline double dot(const Point& a, const Point& b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}
inline double norm(const Point& a, int n) { return std::sqrt(dot(a, a, n)); }
inline double dist(const Point& a, const Point& b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}
inline Point operator+(const Point& a, const Point& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}
inline Point operator-(const Point& a, const Point& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]};
}
inline Point operator*(double s, const Point& a) { return {s * a[0], s * a[1], s * a[2], s * a[3]}; }

struct Box {
  Point lo{};
  Point hi{};
  int n = 0;

  double side(int i) const { return hi[i] - lo[i]; }
  double volume() const;
  double diam() const;
  Point center() const;
  bool contains(const Point& x) const;            // closed
  bool contains_half_open(const Point& x) const;  // [lo, hi)
  double distance_to(const Point& x) const;
  double distance_to(const Box& b) const;
  Box dilated(double factor) const;               // concentric scaling
};

// Errors mapped to CLI exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VerificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Tag { Measured, Formula, Fitted };

// Every number leaving the library through a report carries its provenance.
Json tagged(double value, Tag tag);
const char* tag_name(Tag tag);

// Portable uniform draw in [0,1); std distributions are implementation-defined.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
inline double uniform(std::mt19937_64& rng, double a, double b) { return a + (b - a) * uniform01(rng); }

// Halton radical inverse, used for deterministic low-discrepancy sampling.
double radical_inverse(std::uint64_t i, int base);

void set_workers(int k);
int workers();

// Runs body(i) for i in [0, count) on the configured worker pool.
// Each index must write only to its own slots so results stay deterministic.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

// Deterministic fixed-format rendering for CSV output.
std::string fmt_double(double v);

}  // namespace saw
