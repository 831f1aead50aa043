#include "saw/boundary.hpp"

#include <algorithm>
#include <queue>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace saw {

namespace {

constexpr double kPi = 3.14159265358979323846;

double integrate(const std::function<double(double)>& f, double a, double b, double tol, unsigned depth = 15,
                 double* err = nullptr) {
  if (!(b > a)) return 0.0;
  double e = 0.0;
  double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, depth, tol, &e);
  if (err) *err = e;
  return v;
}

double transverse_norm2(const Point& x, int from, int n) {
  double s = 0.0;
  for (int i = from; i < n; ++i) s += x[i] * x[i];
  return s;
}

double box_transverse2(const Box& b, int from, int n) {
  double s = 0.0;
  for (int i = from; i < n; ++i) {
    double e = std::max({b.lo[i], 0.0, -b.hi[i]});
    s += e * e;
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------- Boundary

Boundary::Boundary(int n, double d, const Box& window) : n_(n), d_(d), window_(window) {
  if (n < 2 || n > kMaxDim) throw ConfigError("ambient.n must be in [2, 4]");
  if (!(d > 0.0) || d >= n) throw ConfigError("ambient.d must lie in (0, n)");
  window_.n = n;
  if (!(window_.volume() > 0.0)) throw ConfigError("window must have positive volume");
}

double Boundary::weight(const Point& x) const { return std::pow(distance(x), d_ + 1.0 - n_); }

bool Boundary::ball_truncated(const Point& x, double r) const {
  for (int i = 0; i < n_; ++i)
    if (x[i] - r < window_.lo[i] || x[i] + r > window_.hi[i]) return true;
  return false;
}

double Boundary::box_distance(const Box& b) const {
  const double tol = box_tolerance * b.diam();
  double best = std::numeric_limits<double>::infinity();
  std::vector<Box> stack{b};
  std::size_t evals = 0;
  while (!stack.empty()) {
    Box cur = stack.back();
    stack.pop_back();
    double dc = distance(cur.center());
    ++evals;
    best = std::min(best, dc);
    if (best <= tol) return best;
    double lower = dc - 0.5 * cur.diam();
    if (lower >= best - tol || cur.diam() < tol || evals > 2000000) continue;
    for (int mask = 0; mask < (1 << n_); ++mask) {
      Box child = cur;
      for (int i = 0; i < n_; ++i) {
        double mid = 0.5 * (cur.lo[i] + cur.hi[i]);
        if (mask & (1 << i))
          child.lo[i] = mid;
        else
          child.hi[i] = mid;
      }
      stack.push_back(child);
    }
  }
  return best;
}

double Boundary::ball_diameter(const Point& x, double r) const {
  auto at = atoms(default_k_max() + 2);
  double best = 0.0;
  std::vector<Point> in;
  for (const auto& a : at)
    if (dist(a.x, x, n_) < r) in.push_back(a.x);
  for (std::size_t i = 0; i < in.size(); ++i)
    for (std::size_t j = i + 1; j < in.size(); ++j) best = std::max(best, dist(in[i], in[j], n_));
  return best;
}

// ---------------------------------------------------------------- affine

AffineBoundary::AffineBoundary(int n, int d, const Box& window) : Boundary(n, d, window), di_(d) {
  if (d < 1 || d >= n) throw ConfigError("affine boundary needs integer 1 <= d < n");
}

double AffineBoundary::unit_ball_volume(double d) {
  return std::pow(kPi, 0.5 * d) / boost::math::tgamma(0.5 * d + 1.0);
}

double AffineBoundary::distance(const Point& x) const { return std::sqrt(transverse_norm2(x, di_, n_)); }

Point AffineBoundary::nearest(const Point& x) const {
  Point p{};
  for (int i = 0; i < di_; ++i) p[i] = x[i];
  return p;
}

double AffineBoundary::box_distance(const Box& b) const { return std::sqrt(box_transverse2(b, di_, n_)); }

double AffineBoundary::ball_mass(const Point& x, double r) const {
  double h2 = r * r - transverse_norm2(x, di_, n_);
  if (h2 <= 0.0) return 0.0;
  return unit_ball_volume(di_) * std::pow(h2, 0.5 * di_);
}

double AffineBoundary::ball_diameter(const Point& x, double r) const {
  double h2 = r * r - transverse_norm2(x, di_, n_);
  return h2 > 0.0 ? 2.0 * std::sqrt(h2) : 0.0;
}

std::vector<Atom> AffineBoundary::atoms(int k_leaf) const {
  const double h = std::ldexp(1.0, -k_leaf);
  std::array<long long, kMaxDim> lo{}, cnt{};
  long long total = 1;
  for (int i = 0; i < di_; ++i) {
    lo[i] = static_cast<long long>(std::ceil(window_.lo[i] / h));
    long long hi = static_cast<long long>(std::floor(window_.hi[i] / h));
    cnt[i] = std::max(0LL, hi - lo[i]);
    total *= cnt[i];
  }
  for (int i = di_; i < n_; ++i)
    if (window_.lo[i] > 0.0 || window_.hi[i] < 0.0) total = 0;
  if (total > 50000000) throw ConfigError("affine atom count too large for k_leaf");
  std::vector<Atom> out(static_cast<std::size_t>(total));
  const double mass = std::pow(h, di_);
  for (long long id = 0; id < total; ++id) {
    long long rem = id;
    Atom a;
    for (int i = di_ - 1; i >= 0; --i) {
      long long c = rem % cnt[i];
      rem /= cnt[i];
      a.x[i] = (lo[i] + c + 0.5) * h;
    }
    a.mass = mass;
    out[id] = a;
  }
  return out;
}

Point AffineBoundary::sample_point(std::mt19937_64& rng) const {
  Point p{};
  for (int i = 0; i < di_; ++i) p[i] = uniform(rng, window_.lo[i], window_.hi[i]);
  return p;
}

double AffineBoundary::adr_constant() const {
  double w = unit_ball_volume(di_);
  return std::max(w, 1.0 / w);
}

// ---------------------------------------------------------------- cantor

CantorBoundary::CantorBoundary(int n, int m, double ratio, const std::string& cross, int depth, const Box& window,
                               std::optional<double> declared_cd)
    : Boundary(n, std::log(static_cast<double>(m)) / std::log(1.0 / ratio) + (cross == "axis" ? 1.0 : 0.0), window),
      m_(m),
      r_(ratio),
      cross_axis_(cross == "axis"),
      depth_(depth) {
  if (m < 2) throw ConfigError("cantor.m must be >= 2");
  if (!(ratio > 0.0) || m * ratio >= 1.0) throw ConfigError("cantor.ratio must satisfy 0 < m * ratio < 1");
  if (cross != "point" && cross != "axis") throw ConfigError("cantor.cross must be 'point' or 'axis'");
  if (cross_axis_ && n < 3) throw ConfigError("cantor cross axis needs n >= 3");
  if (depth < 1 || depth > 24) throw ConfigError("cantor.depth must be in [1, 24]");
  if (declared_cd) {
    cd_ = *declared_cd;
  } else if (!cross_axis_) {
    // An interval of length 2 r^k meets at most N level-k pieces: 2 > (N-1) g/r + (N-2).
    double g = (1.0 - m * ratio) / (m - 1);
    double q = g / ratio;
    int N = static_cast<int>(std::ceil((4.0 + q) / (1.0 + q))) - 1;
    cd_ = std::max(1, N) * static_cast<double>(m);
  } else {
    cd_ = 0.0;
    auto plan = adr_sample_plan(*this, 400, 1.0, 6, 0x5eed);
    double sup = 0.0, inf = std::numeric_limits<double>::infinity();
    for (auto& [x, r] : plan) {
      double q = ball_mass(x, r) / std::pow(r, d_);
      sup = std::max(sup, q);
      inf = std::min(inf, q);
    }
    cd_ = 1.25 * std::max(sup, 1.0 / inf);
  }
}

double CantorBoundary::dist1(double t) const {
  if (t <= 0.0) return -t;
  if (t >= 1.0) return t - 1.0;
  double base = 0.0, scale = 1.0;
  for (int it = 0; it < 200; ++it) {
    double u = (t - base) / scale;
    if (u <= 0.0) return (base - t);
    if (u >= 1.0) return t - (base + scale);
    int i = std::min(m_ - 1, static_cast<int>(u * (m_ - 1) / (1.0 - r_)));
    // Piece i starts at offset(i); u is either in it or in the gap after it.
    if (u < offset(i)) --i;
    if (u <= offset(i) + r_) {
      base += offset(i) * scale;
      scale *= r_;
      if (scale < 1e-18) return 0.0;
      continue;
    }
    return std::min(u - (offset(i) + r_), offset(i + 1) - u) * scale;
  }
  return 0.0;
}

double CantorBoundary::nearest1(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  double base = 0.0, scale = 1.0;
  for (int it = 0; it < 200; ++it) {
    double u = (t - base) / scale;
    if (u <= 0.0) return base;
    if (u >= 1.0) return base + scale;
    int i = std::min(m_ - 1, static_cast<int>(u * (m_ - 1) / (1.0 - r_)));
    if (u < offset(i)) --i;
    if (u <= offset(i) + r_) {
      base += offset(i) * scale;
      scale *= r_;
      if (scale < 1e-18) return t;
      continue;
    }
    double left = u - (offset(i) + r_), right = offset(i + 1) - u;
    return left <= right ? base + (offset(i) + r_) * scale : base + offset(i + 1) * scale;
  }
  return t;
}

double CantorBoundary::succ1(double t) const {
  if (t <= 0.0) return 0.0;
  if (t > 1.0) return std::numeric_limits<double>::infinity();
  double base = 0.0, scale = 1.0;
  for (int it = 0; it < 200; ++it) {
    double u = (t - base) / scale;
    if (u <= 0.0) return base;
    int i = std::min(m_ - 1, static_cast<int>(u * (m_ - 1) / (1.0 - r_)));
    if (u < offset(i)) --i;
    if (u <= offset(i) + r_) {
      base += offset(i) * scale;
      scale *= r_;
      if (scale < 1e-18) return t;
      continue;
    }
    return base + offset(i + 1) * scale;
  }
  return t;
}

double CantorBoundary::pred1(double t) const {
  if (t >= 1.0) return 1.0;
  if (t < 0.0) return -std::numeric_limits<double>::infinity();
  double base = 0.0, scale = 1.0;
  for (int it = 0; it < 200; ++it) {
    double u = (t - base) / scale;
    if (u >= 1.0) return base + scale;
    int i = std::min(m_ - 1, static_cast<int>(u * (m_ - 1) / (1.0 - r_)));
    if (u < offset(i)) --i;
    if (i < 0) return base;
    if (u <= offset(i) + r_) {
      base += offset(i) * scale;
      scale *= r_;
      if (scale < 1e-18) return t;
      continue;
    }
    return base + (offset(i) + r_) * scale;
  }
  return t;
}

double CantorBoundary::mass1(double a, double b) const {
  // Local coordinates of the current piece; mass of the unit piece is 1.
  std::function<double(double, double, int)> rec = [&](double lo, double hi, int depth) -> double {
    if (hi <= 0.0 || lo >= 1.0 || hi <= lo) return 0.0;
    if (lo <= 0.0 && hi >= 1.0) return 1.0;
    if (depth > 60) return std::clamp(hi, 0.0, 1.0) - std::clamp(lo, 0.0, 1.0);
    double s = 0.0;
    for (int i = 0; i < m_; ++i) s += rec((lo - offset(i)) / r_, (hi - offset(i)) / r_, depth + 1);
    return s / m_;
  };
  return rec(a, b, 0);
}

double CantorBoundary::interval_distance1(double lo, double hi) const {
  if (succ1(lo) <= hi) return 0.0;
  return std::min(dist1(lo), dist1(hi));
}

double CantorBoundary::distance(const Point& x) const {
  double t = dist1(x[0]);
  return std::sqrt(t * t + transverse_norm2(x, cross_axis_ ? 2 : 1, n_));
}

Point CantorBoundary::nearest(const Point& x) const {
  Point p{};
  p[0] = nearest1(x[0]);
  if (cross_axis_) p[1] = x[1];
  return p;
}

double CantorBoundary::box_distance(const Box& b) const {
  double t = interval_distance1(b.lo[0], b.hi[0]);
  return std::sqrt(t * t + box_transverse2(b, cross_axis_ ? 2 : 1, n_));
}

double CantorBoundary::ball_mass(const Point& x, double r) const {
  double R2 = r * r - transverse_norm2(x, cross_axis_ ? 2 : 1, n_);
  if (R2 <= 0.0) return 0.0;
  double R = std::sqrt(R2);
  if (!cross_axis_) return mass1(x[0] - R, x[0] + R);
  auto f = [&](double phi) {
    double w = R * std::cos(phi);
    return mass1(x[0] - w, x[0] + w) * w;
  };
  return integrate(f, -0.5 * kPi, 0.5 * kPi, 1e-8, 12);
}

double CantorBoundary::ball_diameter(const Point& x, double r) const {
  double R2 = r * r - transverse_norm2(x, cross_axis_ ? 2 : 1, n_);
  if (R2 <= 0.0) return 0.0;
  double R = std::sqrt(R2);
  if (cross_axis_) return 2.0 * R;
  double s = succ1(std::nextafter(x[0] - R, 2.0));
  double p = pred1(std::nextafter(x[0] + R, -1.0));
  return std::max(0.0, p - s);
}

std::vector<Atom> CantorBoundary::atoms(int k_leaf) const {
  std::vector<double> left{0.0};
  double len = 1.0;
  for (int j = 0; j < depth_; ++j) {
    std::vector<double> next;
    next.reserve(left.size() * m_);
    for (double a : left)
      for (int i = 0; i < m_; ++i) next.push_back(a + offset(i) * len);
    left.swap(next);
    len *= r_;
  }
  const double mass = std::pow(static_cast<double>(m_), -depth_);
  std::vector<Atom> out;
  auto inside_rest = [&](int from) {
    for (int i = from; i < n_; ++i)
      if (window_.lo[i] > 0.0 || window_.hi[i] < 0.0) return false;
    return true;
  };
  if (!cross_axis_) {
    if (!inside_rest(1)) return out;
    for (double a : left)
      if (a >= window_.lo[0] && a <= window_.hi[0]) {
        Atom at;
        at.x[0] = a;
        at.mass = mass;
        out.push_back(at);
      }
    return out;
  }
  if (!inside_rest(2)) return out;
  const double h = std::ldexp(1.0, -k_leaf);
  long long lo = static_cast<long long>(std::ceil(window_.lo[1] / h));
  long long hi = static_cast<long long>(std::floor(window_.hi[1] / h));
  for (double a : left) {
    if (a < window_.lo[0] || a > window_.hi[0]) continue;
    for (long long c = lo; c < hi; ++c) {
      Atom at;
      at.x[0] = a;
      at.x[1] = (c + 0.5) * h;
      at.mass = mass * h;
      out.push_back(at);
    }
  }
  return out;
}

int CantorBoundary::default_k_max() const {
  return static_cast<int>(std::floor(depth_ * std::log(1.0 / r_) / std::log(2.0) + 1e-12));
}

Point CantorBoundary::sample_point(std::mt19937_64& rng) const {
  Point p{};
  for (int attempt = 0; attempt < 1000; ++attempt) {
    double t = 0.0, len = 1.0;
    for (int j = 0; j < 40 && len > 1e-16; ++j) {
      int i = static_cast<int>(uniform01(rng) * m_);
      t += offset(std::min(i, m_ - 1)) * len;
      len *= r_;
    }
    p[0] = t;
    if (cross_axis_) p[1] = uniform(rng, window_.lo[1], window_.hi[1]);
    if (t >= window_.lo[0] && t <= window_.hi[0]) return p;
  }
  throw ConfigError("window does not meet the Cantor set");
}

// ---------------------------------------------------------------- lipschitz graph

LipschitzGraphBoundary::LipschitzGraphBoundary(int n, double amplitude, double frequency, const Box& window)
    : Boundary(n, 1.0, window), a_(amplitude), w_(frequency) {}

Point LipschitzGraphBoundary::curve(double t) const {
  Point p{};
  p[0] = t;
  p[1] = a_ * std::sin(w_ * t);
  return p;
}

double LipschitzGraphBoundary::speed(double t) const {
  double s = a_ * w_ * std::cos(w_ * t);
  return std::sqrt(1.0 + s * s);
}

double LipschitzGraphBoundary::nearest_param(const Point& x) const {
  auto f = [&](double t) {
    Point c = curve(t);
    double s = 0.0;
    for (int i = 0; i < n_; ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
    return s;
  };
  double D0 = std::sqrt(f(x[0]));
  if (D0 == 0.0) return x[0];
  const int N = 256;
  double lo = x[0] - D0, step = 2.0 * D0 / N;
  int best = 0;
  double bv = f(lo);
  for (int i = 1; i <= N; ++i) {
    double v = f(lo + i * step);
    if (v < bv) {
      bv = v;
      best = i;
    }
  }
  // Golden-section refinement on the bracketing cell pair.
  double a = lo + (best - 1) * step, b = lo + (best + 1) * step;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 100 && b - a > 1e-15 * (1.0 + std::abs(x[0])); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  double t = 0.5 * (a + b);
  return f(t) <= bv ? t : lo + best * step;
}

double LipschitzGraphBoundary::distance(const Point& x) const { return dist(x, curve(nearest_param(x)), n_); }

Point LipschitzGraphBoundary::nearest(const Point& x) const { return curve(nearest_param(x)); }

double LipschitzGraphBoundary::ball_mass(const Point& x, double r) const {
  auto f = [&](double t) { return dist(curve(t), x, n_) - r; };
  const int N = 512;
  double lo = x[0] - r, step = 2.0 * r / N;
  auto sp = [&](double t) { return speed(t); };
  double total = 0.0;
  double prev_t = lo, prev_f = f(lo);
  double enter = prev_f < 0.0 ? lo : std::numeric_limits<double>::quiet_NaN();
  auto root = [&](double a, double b) {
    double fa = f(a);
    for (int it = 0; it < 60; ++it) {
      double m = 0.5 * (a + b);
      double fm = f(m);
      if ((fm < 0.0) == (fa < 0.0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    return 0.5 * (a + b);
  };
  for (int i = 1; i <= N; ++i) {
    double t = lo + i * step, ft = f(t);
    if ((ft < 0.0) != (prev_f < 0.0)) {
      double z = root(prev_t, t);
      if (ft < 0.0) {
        enter = z;
      } else {
        total += integrate(sp, enter, z, 1e-10);
        enter = std::numeric_limits<double>::quiet_NaN();
      }
    }
    prev_t = t;
    prev_f = ft;
  }
  if (!std::isnan(enter)) total += integrate(sp, enter, lo + N * step, 1e-10);
  return total;
}

std::vector<Atom> LipschitzGraphBoundary::atoms(int k_leaf) const {
  const double h = std::ldexp(1.0, -k_leaf);
  long long lo = static_cast<long long>(std::ceil(window_.lo[0] / h));
  long long hi = static_cast<long long>(std::floor(window_.hi[0] / h));
  std::vector<Atom> out;
  auto sp = [&](double t) { return speed(t); };
  for (long long c = lo; c < hi; ++c) {
    Atom a;
    a.x = curve((c + 0.5) * h);
    if (!window_.contains(a.x)) continue;
    a.mass = integrate(sp, c * h, (c + 1) * h, 1e-12);
    out.push_back(a);
  }
  return out;
}

Point LipschitzGraphBoundary::sample_point(std::mt19937_64& rng) const {
  double vmax = std::sqrt(1.0 + lipschitz() * lipschitz());
  for (int attempt = 0; attempt < 100000; ++attempt) {
    double t = uniform(rng, window_.lo[0], window_.hi[0]);
    if (uniform01(rng) * vmax <= speed(t) && window_.contains(curve(t))) return curve(t);
  }
  throw ConfigError("window does not meet the graph");
}

double LipschitzGraphBoundary::adr_constant() const {
  return 2.0 * std::sqrt(1.0 + lipschitz() * lipschitz());
}

// ---------------------------------------------------------------- point net

PointNetBoundary::PointNetBoundary(int n, double d, std::vector<Atom> pts, const Box& window, double declared_cd)
    : Boundary(n, d, window), pts_(std::move(pts)), cd_(declared_cd) {
  if (pts_.empty()) throw ConfigError("point-net needs at least one point");
  std::vector<Point> xs;
  xs.reserve(pts_.size());
  double acc = 0.0;
  for (const auto& a : pts_) {
    xs.push_back(a.x);
    acc += a.mass;
    cumulative_.push_back(acc);
  }
  tree_ = KdTree(xs, n);
}

double PointNetBoundary::distance(const Point& x) const { return tree_.nearest(x).second; }

Point PointNetBoundary::nearest(const Point& x) const { return pts_[tree_.nearest(x).first].x; }

double PointNetBoundary::ball_mass(const Point& x, double r) const {
  double s = 0.0;
  for (int i : tree_.within(x, r)) s += pts_[i].mass;
  return s;
}

double PointNetBoundary::ball_diameter(const Point& x, double r) const {
  auto in = tree_.within(x, r);
  double best = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i)
    for (std::size_t j = i + 1; j < in.size(); ++j) best = std::max(best, dist(pts_[in[i]].x, pts_[in[j]].x, n_));
  return best;
}

std::vector<Atom> PointNetBoundary::atoms(int) const {
  std::vector<Atom> out;
  for (const auto& a : pts_)
    if (window_.contains(a.x)) out.push_back(a);
  return out;
}

Point PointNetBoundary::sample_point(std::mt19937_64& rng) const {
  double u = uniform01(rng) * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  std::size_t i = std::min<std::size_t>(it - cumulative_.begin(), pts_.size() - 1);
  return pts_[i].x;
}

// ---------------------------------------------------------------- factory

BoundaryPtr make_boundary(const Json& spec, int n, const Box& window) {
  if (!spec.contains("kind")) throw ConfigError("boundary.kind is required");
  const std::string kind = spec["kind"].get<std::string>();
  const Json params = spec.value("params", Json::object());
  try {
    if (kind == "affine") return std::make_shared<AffineBoundary>(n, params.value("d", 1), window);
    if (kind == "cantor") {
      std::optional<double> cd;
      if (params.contains("adr_constant")) cd = params["adr_constant"].get<double>();
      return std::make_shared<CantorBoundary>(n, params.value("m", 2), params.value("ratio", 1.0 / 3.0),
                                              params.value("cross", std::string("point")), params.value("depth", 12),
                                              window, cd);
    }
    if (kind == "lipschitz-graph")
      return std::make_shared<LipschitzGraphBoundary>(n, params.value("amplitude", 0.25),
                                                      params.value("frequency", 2.0), window);
    if (kind == "point-net") {
      if (!params.contains("d")) throw ConfigError("boundary.params.d is required for point-net");
      double d = params["d"].get<double>();
      std::vector<Atom> pts;
      if (params.contains("points")) {
        const auto& P = params["points"];
        for (std::size_t i = 0; i < P.size(); ++i) {
          Atom a;
          for (int j = 0; j < n && j < static_cast<int>(P[i].size()); ++j) a.x[j] = P[i][j].get<double>();
          a.mass = params.contains("masses") ? params["masses"][i].get<double>() : 1.0 / P.size();
          pts.push_back(a);
        }
      } else if (params.contains("sample_of")) {
        auto base = make_boundary(params["sample_of"], n, window);
        pts = base->atoms(params.value("level", base->default_k_max()));
      } else {
        throw ConfigError("point-net needs params.points or params.sample_of");
      }
      return std::make_shared<PointNetBoundary>(n, d, std::move(pts), window, params.value("adr_constant", 10.0));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("boundary.params: ") + e.what());
  }
  throw ConfigError("unknown boundary.kind '" + kind + "'");
}

// ---------------------------------------------------------------- ADR

Json AdrReport::to_json() const {
  Json j;
  j["samples"] = samples;
  j["truncated"] = truncated;
  j["sup_ratio"] = tagged(sup_ratio, Tag::Measured);
  j["inf_ratio"] = tagged(inf_ratio, Tag::Measured);
  j["implied_cd"] = tagged(implied_cd, Tag::Fitted);
  j["band_violations"] = band_violations;
  j["min_diam_ratio"] = tagged(min_diam_ratio, Tag::Measured);
  j["diam_floor"] = tagged(diam_floor, Tag::Formula);
  j["nondegenerate"] = nondegenerate;
  return j;
}

AdrReport adr_estimate(const Boundary& g, const std::vector<std::pair<Point, double>>& samples) {
  if (samples.size() < 100) throw ConfigError("adr_estimate needs at least 100 samples");
  double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
  for (auto& s : samples) {
    rmin = std::min(rmin, s.second);
    rmax = std::max(rmax, s.second);
  }
  if (!(rmax >= 8.0 * rmin)) throw ConfigError("adr_estimate samples must span at least 4 dyadic scales");
  AdrReport rep;
  rep.samples = static_cast<int>(samples.size());
  const double cd = g.adr_constant();
  rep.diam_floor = std::pow(2.0, -1.0 / g.d()) * std::pow(cd, -2.0 / g.d());
  rep.inf_ratio = std::numeric_limits<double>::infinity();
  rep.min_diam_ratio = std::numeric_limits<double>::infinity();
  std::vector<double> ratio(samples.size()), diam(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    ratio[i] = g.ball_mass(samples[i].first, samples[i].second) / std::pow(samples[i].second, g.d());
    diam[i] = g.ball_diameter(samples[i].first, samples[i].second) / samples[i].second;
  });
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rep.sup_ratio = std::max(rep.sup_ratio, ratio[i]);
    rep.inf_ratio = std::min(rep.inf_ratio, ratio[i]);
    rep.min_diam_ratio = std::min(rep.min_diam_ratio, diam[i]);
    if (ratio[i] > cd * (1 + 1e-12) || ratio[i] < (1 - 1e-12) / cd) ++rep.band_violations;
    if (g.ball_truncated(samples[i].first, samples[i].second)) ++rep.truncated;
  }
  rep.implied_cd = std::max(rep.sup_ratio, 1.0 / rep.inf_ratio);
  rep.nondegenerate = rep.min_diam_ratio >= rep.diam_floor;
  return rep;
}

std::vector<std::pair<Point, double>> adr_sample_plan(const Boundary& g, int count, double r_max, int scales,
                                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<Point, double>> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Point x = g.sample_point(rng);
    double r = r_max * std::exp2(-scales * (i + 0.5) / count);
    out.emplace_back(x, r);
  }
  return out;
}

// ---------------------------------------------------------------- corkscrews

Corkscrew corkscrew_point(const Boundary& g, const Point& x, double r, double floor) {
  const int n = g.n();
  static const int primes[kMaxDim] = {2, 3, 5, 7};
  auto score = [&](const Point& X) { return std::min(g.distance(X), r - dist(X, x, n)); };
  const int N = n == 2 ? 1024 : (n == 3 ? 4096 : 8192);
  Corkscrew best;
  best.X = x;
  double bv = -1.0;
  for (int i = 1; i <= N; ++i) {
    Point X = x;
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      double u = 2.0 * radical_inverse(i, primes[j]) - 1.0;
      X[j] += r * u;
      s += u * u;
    }
    if (s >= 1.0) continue;
    double v = score(X);
    if (v > bv) {
      bv = v;
      best.X = X;
    }
  }
  for (double step = r / 8.0; step > r * 1e-5; step *= 0.5) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (int j = 0; j < n; ++j)
        for (int sgn = -1; sgn <= 1; sgn += 2) {
          Point X = best.X;
          X[j] += sgn * step;
          double v = score(X);
          if (v > bv) {
            bv = v;
            best.X = X;
            moved = true;
          }
        }
    }
  }
  best.c = bv / r;
  if (!(best.c >= floor))
    throw VerificationError("corkscrew search failed: achieved c = " + std::to_string(best.c));
  return best;
}

double segment_min_distance(const Boundary& g, const Point& a, const Point& b) {
  const int n = g.n();
  const double L = dist(a, b, n);
  auto at = [&](double t) { return g.distance(a + t * (b - a)); };
  double fa = at(0.0), fb = at(1.0);
  double upper = std::min(fa, fb);
  if (L == 0.0) return upper;
  struct Seg {
    double t0, t1, f0, f1, lb;
    bool operator<(const Seg& o) const { return lb > o.lb; }
  };
  auto lower = [&](double t0, double t1, double f0, double f1) {
    return 0.5 * (f0 + f1) - 0.5 * L * (t1 - t0);
  };
  std::priority_queue<Seg> q;
  q.push({0.0, 1.0, fa, fb, lower(0.0, 1.0, fa, fb)});
  for (int it = 0; it < 200000 && !q.empty(); ++it) {
    Seg s = q.top();
    if (s.lb >= upper * (1.0 - 1e-3)) return std::max(0.0, std::min(s.lb, upper));
    q.pop();
    double tm = 0.5 * (s.t0 + s.t1), fm = at(tm);
    upper = std::min(upper, fm);
    q.push({s.t0, tm, s.f0, fm, lower(s.t0, tm, s.f0, fm)});
    q.push({tm, s.t1, fm, s.f1, lower(tm, s.t1, fm, s.f1)});
  }
  return q.empty() ? upper : std::max(0.0, std::min(q.top().lb, upper));
}

HarnackChain harnack_chain(const Boundary& g, const Point& X1, const Point& X2, double s, double lambda) {
  const int n = g.n();
  if (!(g.d() < n - 1)) throw ConfigError("Harnack chains need d < n - 1");
  if (g.distance(X1) < s * (1 - 1e-12) || g.distance(X2) < s * (1 - 1e-12))
    throw ConfigError("Harnack chain endpoints must satisfy delta >= s");
  if (dist(X1, X2, n) > lambda * s * (1 + 1e-12)) throw ConfigError("Harnack chain endpoints exceed Lambda s");
  HarnackChain hc;
  hc.Y1 = X1;
  hc.Y2 = X2;
  const double scale = std::pow(lambda, -g.d() / (n - 1 - g.d())) * s;
  if (dist(X1, X2, n) == 0.0) {
    hc.segment_distance = g.distance(X1);
    hc.balls.push_back({X1, 0.5 * hc.segment_distance});
    hc.c_h = hc.segment_distance / scale;
    return hc;
  }
  double best = segment_min_distance(g, X1, X2);
  static const int primes[kMaxDim] = {2, 3, 5, 7};
  for (int i = 1; i <= 64; ++i) {
    Point d1{}, d2{};
    double s1 = 0.0, s2 = 0.0;
    for (int j = 0; j < n; ++j) {
      d1[j] = 2.0 * radical_inverse(i, primes[j]) - 1.0;
      d2[j] = 2.0 * radical_inverse(i + 64, primes[j]) - 1.0;
      s1 += d1[j] * d1[j];
      s2 += d2[j] * d2[j];
    }
    if (s1 >= 1.0 || s2 >= 1.0) continue;
    for (int mode = 0; mode < 2; ++mode) {
      Point Y1 = X1 + (0.5 * s * 0.999) * d1;
      Point Y2 = X2 + (0.5 * s * 0.999) * (mode == 0 ? d1 : d2);
      double v = segment_min_distance(g, Y1, Y2);
      if (v > best) {
        best = v;
        hc.Y1 = Y1;
        hc.Y2 = Y2;
      }
    }
  }
  if (!(best > 0.0)) throw VerificationError("no admissible Harnack segment found");
  hc.segment_distance = best;
  const double rho = 0.5 * best;
  const double L = dist(hc.Y1, hc.Y2, n);
  const int count = static_cast<int>(std::ceil(L / rho)) + 1;
  for (int i = 0; i < count; ++i) {
    double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    hc.balls.push_back({hc.Y1 + t * (hc.Y2 - hc.Y1), rho});
  }
  hc.c_h = 2.0 * rho / scale;
  return hc;
}

// ---------------------------------------------------------------- m measure

namespace {

// Tensor 3-point Gauss-Legendre rule on a box.
double gauss_box(const Boundary& g, const Box& b) {
  static const double x3[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static const double w3[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const int n = g.n();
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  double s = 0.0;
  for (int id = 0; id < total; ++id) {
    int rem = id;
    Point X{};
    double w = 1.0;
    for (int i = 0; i < n; ++i) {
      int k = rem % 3;
      rem /= 3;
      X[i] = 0.5 * (b.lo[i] + b.hi[i]) + 0.5 * b.side(i) * x3[k];
      w *= w3[k];
    }
    double dX = g.distance(X);
    s += w * (dX > 0.0 ? std::pow(dX, g.d() + 1.0 - n) : 0.0);
  }
  return s * b.volume() / std::pow(2.0, n);
}

std::vector<Box> split(const Box& b) {
  std::vector<Box> out;
  for (int mask = 0; mask < (1 << b.n); ++mask) {
    Box c = b;
    for (int i = 0; i < b.n; ++i) {
      double mid = 0.5 * (b.lo[i] + b.hi[i]);
      if (mask & (1 << i))
        c.lo[i] = mid;
      else
        c.hi[i] = mid;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace

MeasureResult m_box(const Boundary& g, const Box& box, double rel_tol) {
  MeasureResult res;
  const int max_depth = g.n() == 2 ? 14 : (g.n() == 3 ? 9 : 6);
  double coarse = gauss_box(g, box);
  const double total_vol = box.volume();
  std::function<double(const Box&, double, int)> rec = [&](const Box& b, double q, int depth) -> double {
    auto kids = split(b);
    std::vector<double> qk(kids.size());
    double fine = 0.0;
    for (std::size_t i = 0; i < kids.size(); ++i) fine += (qk[i] = gauss_box(g, kids[i]));
    double tol = rel_tol * std::max(std::abs(coarse), 1e-300) * (b.volume() / total_vol);
    if (std::abs(fine - q) <= tol) return fine;
    if (depth >= max_depth) {
      res.error += std::abs(fine - q);
      return fine;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < kids.size(); ++i) s += rec(kids[i], qk[i], depth + 1);
    return s;
  };
  res.value = rec(box, coarse, 0);
  res.converged = res.error <= rel_tol * std::abs(res.value);
  return res;
}

MeasureResult m_ball(const Boundary& g, const Point& X, double r, double rel_tol) {
  const int n = g.n();
  MeasureResult res;
  double err_total = 0.0;
  // Iterated integral; each level integrates x_i = X_i + R sin(phi) over the remaining radius R.
  std::function<double(Point&, int, double)> level = [&](Point& P, int i, double R2) -> double {
    double R = std::sqrt(std::max(R2, 0.0));
    if (i == n - 1) {
      auto f = [&](double phi) {
        Point Q = P;
        Q[i] = X[i] + R * std::sin(phi);
        double dq = g.distance(Q);
        return dq > 0.0 ? std::pow(dq, g.d() + 1.0 - n) * R * std::cos(phi) : 0.0;
      };
      double e = 0.0;
      double v = integrate(f, -0.5 * kPi, 0.5 * kPi, rel_tol * 0.1, 10, &e);
      err_total += e;
      return v;
    }
    auto f = [&](double phi) {
      Point Q = P;
      double t = R * std::sin(phi);
      Q[i] = X[i] + t;
      return level(Q, i + 1, R2 - t * t) * R * std::cos(phi);
    };
    double e = 0.0;
    double v = integrate(f, -0.5 * kPi, 0.5 * kPi, rel_tol * 0.1, i == 0 ? 10 : 8, &e);
    err_total += e;
    return v;
  };
  Point P = X;
  res.value = level(P, 0, r * r);
  res.error = err_total;
  res.converged = true;
  return res;
}

RegimeSample m_regime(const Boundary& g, const Point& X, double r, double alpha, double rel_tol) {
  RegimeSample s;
  double m = m_ball(g, X, r, rel_tol).value;
  double dX = g.distance(X);
  s.far = dX >= alpha * r;
  s.ratio = s.far ? m / (std::pow(r, g.n()) * std::pow(dX, g.d() + 1.0 - g.n())) : m / std::pow(r, g.d() + 1.0);
  return s;
}

}  // namespace saw
