#include "saw/distance_fn.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

namespace saw {

namespace {

// Pieces closer than kFar * length are subdivided; beyond it a two-term moment expansion is used.
constexpr double kFar = 32.0;
constexpr int kMaxDepth = 64;

// f(a) = K (a^2 + R2)^(q/2) and its second derivative in a.
double profile(double a, double R2, double q) { return std::pow(a * a + R2, 0.5 * q); }
double profile_dd(double a, double R2, double q) {
  double rho2 = a * a + R2;
  return q * std::pow(rho2, 0.5 * q - 1.0) * (1.0 + (q - 2.0) * a * a / rho2);
}

}  // namespace

RegularizedDistance::RegularizedDistance(BoundaryPtr g, double alpha) : g_(std::move(g)), alpha_(alpha) {
  if (!(alpha > 0.0)) throw ConfigError("distance.alpha must be positive");
  if (g_->kind() == "point-net") atoms_ = g_->atoms(0);
}

double RegularizedDistance::affine(const Point& X) const {
  const double d = g_->d();
  const double s = d + alpha_;
  const double t = g_->distance(X);
  if (t <= 0.0) return std::numeric_limits<double>::infinity();
  // ∫_{R^d} (t^2 + |y|^2)^(-s/2) dy = |S^(d-1)| t^(d-s) ∫_0^inf u^(d-1) (1 + u^2)^(-s/2) du.
  boost::math::quadrature::exp_sinh<double> es;
  auto f = [&](double u) { return std::pow(u, d - 1.0) * std::pow(1.0 + u * u, -0.5 * s); };
  double radial = es.integrate(f, 0.0, std::numeric_limits<double>::infinity());
  double sphere = d * AffineBoundary::unit_ball_volume(d);
  return sphere * std::pow(t, d - s) * radial;
}

double RegularizedDistance::cantor(const Point& X) const {
  const auto& C = static_cast<const CantorBoundary&>(*g_);
  const int n = g_->n();
  const double s = g_->d() + alpha_;
  const int m = C.pieces();
  const double r = C.ratio();
  double q, K, R2 = 0.0;
  if (C.cross_axis()) {
    // Integrating the extra axis leaves K rho^(1-s) for the distance rho to each line.
    q = 1.0 - s;
    K = std::sqrt(M_PI) * std::tgamma(0.5 * (s - 1.0)) / std::tgamma(0.5 * s);
    for (int i = 2; i < n; ++i) R2 += X[i] * X[i];
  } else {
    q = -s;
    K = 1.0;
    for (int i = 1; i < n; ++i) R2 += X[i] * X[i];
  }
  // Variance of the normalised Cantor measure on [0, 1].
  double mo = 0.0, mo2 = 0.0;
  for (int i = 0; i < m; ++i) {
    mo += C.offset(i) + 0.5 * r;
    mo2 += (C.offset(i) + 0.5 * r) * (C.offset(i) + 0.5 * r);
  }
  mo /= m;
  mo2 /= m;
  const double var = (mo2 - mo * mo) / (1.0 - r * r);
  const double x0 = X[0];
  std::function<double(double, double, double, int)> rec = [&](double base, double L, double mass, int depth) {
    double c = base + 0.5 * L;
    double a = x0 - c;
    double near = std::sqrt(std::max(0.0, std::abs(a) - 0.5 * L) * std::max(0.0, std::abs(a) - 0.5 * L) + R2);
    if (near >= kFar * L || depth >= kMaxDepth)
      return mass * (profile(a, R2, q) + 0.5 * profile_dd(a, R2, q) * var * L * L);
    double sum = 0.0;
    for (int i = 0; i < m; ++i) sum += rec(base + C.offset(i) * L, L * r, mass / m, depth + 1);
    return sum;
  };
  return K * rec(0.0, 1.0, 1.0, 0);
}

DistanceEval RegularizedDistance::graph(const Point& X) const {
  const auto& G = static_cast<const LipschitzGraphBoundary&>(*g_);
  const int n = g_->n();
  const double s = 1.0 + alpha_;
  // The graph is integrated along the parameter out to kExtent past the window, split at unit steps and at the
  // foot of X; beyond that the curve is replaced by a line carrying the mean speed.
  constexpr double kExtent = 64.0;
  const double a = g_->window().lo[0] - kExtent, b = g_->window().hi[0] + kExtent;
  const double ts = std::clamp(g_->nearest(X)[0], a, b);
  auto f = [&](double t) { return std::pow(dist(X, G.curve(t), n), -s) * G.speed(t); };
  std::vector<double> cuts;
  for (double c = a; c < b; c += 0.5) cuts.push_back(c);
  cuts.push_back(b);
  cuts.push_back(ts);
  std::sort(cuts.begin(), cuts.end());
  long double I = 0.0L;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (cuts[k + 1] - cuts[k] <= 1e-12) continue;
    I += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, cuts[k], cuts[k + 1], 12, 1e-13);
  }
  const double period = 2.0 * M_PI / G.frequency();
  const double mean_speed =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate([&](double t) { return G.speed(t); }, 0.0, period,
                                                                    8, 1e-14) / period;
  DistanceEval ev;
  ev.tail = mean_speed * (std::pow(X[0] - a, 1.0 - s) + std::pow(b - X[0], 1.0 - s)) / (s - 1.0);
  ev.integral = static_cast<double>(I) + ev.tail;
  ev.flagged = ev.tail > 1e-3 * ev.integral;
  return ev;
}

double RegularizedDistance::atoms(const Point& X) const {
  const int n = g_->n();
  const double s = g_->d() + alpha_;
  long double acc = 0.0L;
  for (const auto& a : atoms_) acc += a.mass * std::pow(dist(X, a.x, n), -s);
  return static_cast<double>(acc);
}

DistanceEval RegularizedDistance::evaluate(const Point& X) const {
  DistanceEval ev;
  const std::string kind = g_->kind();
  if (kind == "affine")
    ev.integral = affine(X);
  else if (kind == "cantor")
    ev.integral = cantor(X);
  else if (kind == "lipschitz-graph")
    ev = graph(X);
  else if (kind == "point-net")
    ev.integral = atoms(X);
  else
    throw ConfigError("regularized distance has no quadrature for boundary kind '" + kind + "'");
  ev.value = std::pow(ev.integral, -1.0 / alpha_);
  return ev;
}

Json ComparabilityReport::to_json() const {
  Json j;
  j["samples"] = samples;
  j["lower"] = tagged(lo, Tag::Measured);
  j["upper"] = tagged(hi, Tag::Measured);
  j["flagged"] = flagged;
  return j;
}

ComparabilityReport comparability(const RegularizedDistance& D, const std::vector<Point>& X) {
  ComparabilityReport rep;
  std::vector<double> ratio(X.size());
  std::vector<char> flag(X.size());
  parallel_for(X.size(), [&](std::size_t i) {
    DistanceEval ev = D.evaluate(X[i]);
    ratio[i] = ev.value / D.boundary().distance(X[i]);
    flag[i] = ev.flagged;
  });
  rep.lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < X.size(); ++i) {
    rep.lo = std::min(rep.lo, ratio[i]);
    rep.hi = std::max(rep.hi, ratio[i]);
    rep.flagged += flag[i];
  }
  rep.samples = static_cast<int>(X.size());
  return rep;
}

Json MagicReport::to_json() const {
  Json j;
  j["alpha"] = alpha;
  j["samples"] = extrapolated.size();
  j["max_extrapolated"] = tagged(max_extrapolated, Tag::Measured);
  double mc = 0.0, mf = 0.0;
  for (double v : coarse) mc = std::max(mc, v);
  for (double v : fine) mf = std::max(mf, v);
  j["max_coarse"] = tagged(mc, Tag::Measured);
  j["max_fine"] = tagged(mf, Tag::Measured);
  return j;
}

MagicReport magic_residual(BoundaryPtr g, const std::vector<Point>& X, double h_rel) {
  const int n = g->n();
  const double d = g->d();
  const double ahat = n - d - 2.0;
  if (!(ahat > 0.0)) throw ConfigError("magic alpha needs d < n - 2");
  RegularizedDistance D(g, ahat);
  const double e = n - d - 1.0;
  MagicReport rep;
  rep.alpha = ahat;
  rep.coarse.resize(X.size());
  rep.fine.resize(X.size());
  rep.extrapolated.resize(X.size());
  parallel_for(X.size(), [&](std::size_t k) {
    const Point& P = X[k];
    const double delta = g->distance(P);
    const double D0 = D(P);
    auto residual = [&](double h) {
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        Point a = P, b = P, ha = P, hb = P;
        a[i] += h;
        b[i] -= h;
        ha[i] += 0.5 * h;
        hb[i] -= 0.5 * h;
        double up = std::pow(D(ha), -e) * (D(a) - D0);
        double dn = std::pow(D(hb), -e) * (D0 - D(b));
        sum += (up - dn) / (h * h);
      }
      return -sum;
    };
    double h = h_rel * delta;
    double r1 = residual(h), r2 = residual(0.5 * h);
    double rx = (4.0 * r2 - r1) / 3.0;
    // Each term of the divergence has size |D^-e grad D| / delta, with |grad D| ~ D / delta.
    double unit = std::pow(D0, -e) * D0 / (delta * delta);
    rep.coarse[k] = std::abs(r1) / unit;
    rep.fine[k] = std::abs(r2) / unit;
    rep.extrapolated[k] = std::abs(rx) / unit;
  });
  for (double v : rep.extrapolated) rep.max_extrapolated = std::max(rep.max_extrapolated, v);
  return rep;
}

}  // namespace saw
