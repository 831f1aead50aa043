#include "saw/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <thread>

namespace saw {

double Box::volume() const {
  double v = 1.0;
  for (int i = 0; i < n; ++i) v *= side(i);
  return v;
}

double Box::diam() const {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += side(i) * side(i);
  return std::sqrt(s);
}

Point Box::center() const {
  Point c{};
  for (int i = 0; i < n; ++i) c[i] = 0.5 * (lo[i] + hi[i]);
  return c;
}

bool Box::contains(const Point& x) const {
  for (int i = 0; i < n; ++i)
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  return true;
}

bool Box::contains_half_open(const Point& x) const {
  for (int i = 0; i < n; ++i)
    if (x[i] < lo[i] || x[i] >= hi[i]) return false;
  return true;
}

double Box::distance_to(const Point& x) const {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double e = std::max({lo[i] - x[i], 0.0, x[i] - hi[i]});
    s += e * e;
  }
  return std::sqrt(s);
}

double Box::distance_to(const Box& b) const {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    double e = std::max({lo[i] - b.hi[i], 0.0, b.lo[i] - hi[i]});
    s += e * e;
  }
  return std::sqrt(s);
}

Box Box::dilated(double factor) const {
  Box b = *this;
  for (int i = 0; i < n; ++i) {
    double c = 0.5 * (lo[i] + hi[i]);
    double h = 0.5 * factor * side(i);
    b.lo[i] = c - h;
    b.hi[i] = c + h;
  }
  return b;
}

const char* tag_name(Tag tag) {
  switch (tag) {
    case Tag::Measured: return "measured";
    case Tag::Formula: return "formula";
    case Tag::Fitted: return "fitted";
  }
  return "measured";
}

Json tagged(double value, Tag tag) {
  Json j;
  if (std::isfinite(value))
    j["value"] = value;
  else
    j["value"] = value > 0 ? "inf" : (value < 0 ? "-inf" : "nan");
  j["tag"] = tag_name(tag);
  return j;
}

double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

namespace {
std::atomic<int> g_workers{1};
}

void set_workers(int k) { g_workers = std::max(1, k); }
int workers() { return g_workers; }

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  int w = std::min<std::size_t>(workers(), count);
  if (w <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (int t = 0; t < w; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  for (auto& th : pool) th.join();
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace saw
