#include "saw/carleson.hpp"

#include <algorithm>
#include <boost/math/constants/constants.hpp>
#include <limits>

namespace saw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = boost::math::constants::pi<double>();

double sup_abs_sin(double a, double b, double w) {
  if (w == 0.0) return 0.0;
  if (w < 0) {
    w = -w;
    std::swap(a, b);
    a = -a;
    b = -b;
  }
  if ((b - a) * w >= kPi) return 1.0;
  double k = std::ceil((w * a - 0.5 * kPi) / kPi);
  if ((0.5 * kPi + k * kPi) / w <= b) return 1.0;
  return std::max(std::fabs(std::sin(w * a)), std::fabs(std::sin(w * b)));
}

double bump(double s) { return s < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0; }

Mat read_matrix(const Json& j, int n) {
  Mat M = Mat::Identity();
  if (!j.is_array() || static_cast<int>(j.size()) != n) throw ConfigError("matrix must be an n x n array");
  for (int i = 0; i < n; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != n) throw ConfigError("matrix must be an n x n array");
    for (int k = 0; k < n; ++k) M(i, k) = j[i][k].get<double>();
  }
  return M;
}

// Tensor Gauss-Legendre on a box, 4 nodes per axis.
template <class F>
double gauss_box(const Box& b, F&& f) {
  static const double x[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
  static const double w[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};
  const int n = b.n;
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 4;
  double s = 0.0;
  for (int t = 0; t < total; ++t) {
    Point p{};
    double wt = 1.0;
    int r = t;
    for (int i = 0; i < n; ++i) {
      int q = r % 4;
      r /= 4;
      double h = 0.5 * b.side(i);
      p[i] = b.lo[i] + h * (1.0 + x[q]);
      wt *= h * w[q];
    }
    s += wt * f(p);
  }
  return s;
}

double farthest(const Box& b, const Point& x) {
  double s = 0.0;
  for (int i = 0; i < b.n; ++i) {
    double e = std::max(std::fabs(x[i] - b.lo[i]), std::fabs(x[i] - b.hi[i]));
    s += e * e;
  }
  return std::sqrt(s);
}

}  // namespace

// ------------------------------------------------------------------ fields

double Perturbation::profile(const Point& X) const {
  if (kind == "zero") return 0.0;
  if (kind == "constant") return 1.0;
  if (kind == "oscillatory") return std::sin(frequency * X[0]);
  if (kind == "bump") {
    double s = 0.0;
    for (int i = 0; i < kMaxDim; ++i) s += (X[i] - center[i]) * (X[i] - center[i]);
    return bump(std::sqrt(s) / radius);
  }
  if (kind == "band") {
    double d = boundary->distance(X);
    return d >= band_lo && d <= band_hi ? 1.0 : 0.0;
  }
  throw ConfigError("unknown perturbation kind '" + kind + "'");
}

double Perturbation::sup_ball(const Point& X, double rho, int n) const {
  if (kind == "zero") return 0.0;
  if (kind == "constant") return 1.0;
  if (kind == "oscillatory") return sup_abs_sin(X[0] - rho, X[0] + rho, frequency);
  if (kind == "bump") return bump(std::max(dist(X, center, n) - rho, 0.0) / radius);
  if (kind == "band") {
    double d = boundary->distance(X);
    return std::max(d - rho, 0.0) <= band_hi && d + rho >= band_lo ? 1.0 : 0.0;
  }
  throw ConfigError("unknown perturbation kind '" + kind + "'");
}

double Perturbation::sup_box(const Box& b) const {
  if (kind == "zero") return 0.0;
  if (kind == "constant") return 1.0;
  if (kind == "oscillatory") return sup_abs_sin(b.lo[0], b.hi[0], frequency);
  if (kind == "bump") return bump(b.distance_to(center) / radius);
  if (kind == "band") {
    double d = boundary->box_distance(b);
    return d <= band_hi && d + b.diam() >= band_lo ? 1.0 : 0.0;
  }
  throw ConfigError("unknown perturbation kind '" + kind + "'");
}

double operator_norm(const Mat& A, int n) {
  Eigen::MatrixXd B = A.topLeftCorner(n, n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(B);
  return svd.singularValues()(0);
}

double Perturbation::matrix_norm() const {
  int n = 0;
  for (int i = 0; i < kMaxDim; ++i)
    if (M.row(i).norm() > 0 || M.col(i).norm() > 0) n = i + 1;
  return n == 0 ? 0.0 : std::fabs(eps) * operator_norm(M, kMaxDim);
}

Mat MatrixField::base_at(const Point& X) const {
  if (base == "identity") return Mat::Identity();
  if (base == "constant") return base_M;
  if (base == "smooth") {
    Mat A = Mat::Identity();
    double c = std::cos(X[0]), s = std::sin(X[1]);
    A(0, 0) += smooth_amp * c;
    A(1, 1) += smooth_amp * c;
    A(0, 1) += smooth_amp * s;
    A(1, 0) -= smooth_amp * s;
    return A;
  }
  throw ConfigError("unknown operator base '" + base + "'");
}

Mat MatrixField::perturbation_at(const Point& X) const {
  if (pert.kind == "zero" || pert.eps == 0.0) return Mat::Zero();
  return (pert.eps * pert.profile(X)) * pert.M;
}

Mat MatrixField::operator()(const Point& X) const { return base_at(X) + perturbation_at(X); }

MatrixField MatrixField::unperturbed() const {
  MatrixField f = *this;
  f.pert.kind = "zero";
  return f;
}

MatrixField MatrixField::scaled(double t) const {
  MatrixField f = *this;
  f.pert.eps *= t;
  return f;
}

bool MatrixField::symmetric() const {
  auto sym = [&](const Mat& M) {
    return (M.topLeftCorner(n, n) - M.topLeftCorner(n, n).transpose()).cwiseAbs().maxCoeff() == 0.0;
  };
  bool b = base == "identity" || (base == "constant" && sym(base_M)) || (base == "smooth" && smooth_amp == 0.0);
  bool p = pert.kind == "zero" || pert.eps == 0.0 || sym(pert.M);
  return b && p;
}

double MatrixField::ellipticity(const Box& window, int samples, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  double C = 1.0;
  for (int s = 0; s < samples; ++s) {
    Point X{}, xi{}, ze{};
    for (int i = 0; i < n; ++i) {
      X[i] = uniform(rng, window.lo[i], window.hi[i]);
      xi[i] = uniform(rng, -1.0, 1.0);
      ze[i] = uniform(rng, -1.0, 1.0);
    }
    Mat A = (*this)(X);
    Eigen::Vector4d a(xi[0], xi[1], xi[2], xi[3]), b(ze[0], ze[1], ze[2], ze[3]);
    double q = a.dot(A * a), nn = a.squaredNorm();
    if (nn == 0.0 || b.norm() == 0.0) continue;
    C = std::max(C, q > 0 ? nn / q : kInf);
    C = std::max(C, std::fabs(b.dot(A * a)) / (a.norm() * b.norm()));
  }
  return C;
}

MatrixField make_field(const Json& spec, int n, BoundaryPtr g) {
  MatrixField f;
  f.n = n;
  try {
    f.base = spec.value("base", std::string("identity"));
    if (spec.contains("matrix")) f.base_M = read_matrix(spec["matrix"], n);
    f.smooth_amp = spec.value("amp", 0.3);
    if (f.base != "identity" && f.base != "constant" && f.base != "smooth")
      throw ConfigError("unknown operator base '" + f.base + "'");
    if (spec.contains("perturbation")) {
      const Json& p = spec["perturbation"];
      Perturbation& P = f.pert;
      P.kind = p.value("kind", std::string("zero"));
      P.eps = p.value("eps", 1.0);
      P.M = p.contains("matrix") ? read_matrix(p["matrix"], n) : Mat::Identity();
      if (!p.contains("matrix"))
        for (int i = n; i < kMaxDim; ++i) P.M(i, i) = 0.0;
      P.frequency = p.value("frequency", 8.0);
      P.radius = p.value("radius", 0.25);
      if (p.contains("center"))
        for (int i = 0; i < n && i < static_cast<int>(p["center"].size()); ++i) P.center[i] = p["center"][i].get<double>();
      if (p.contains("band")) {
        P.band_lo = p["band"][0].get<double>();
        P.band_hi = p["band"][1].get<double>();
      }
      P.boundary = g;
      if (P.kind != "zero" && P.kind != "constant" && P.kind != "oscillatory" && P.kind != "bump" && P.kind != "band")
        throw ConfigError("unknown perturbation kind '" + P.kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("operator: ") + e.what());
  }
  double C = f.ellipticity(g->window(), 256, 5);
  if (!std::isfinite(C)) throw ConfigError("operator is not elliptic on the sampled points");
  return f;
}

double disagreement(const MatrixField& A, const Boundary& g, const Point& X) {
  if (A.pert.kind == "zero") return 0.0;
  return A.pert.matrix_norm() * A.pert.sup_ball(X, 0.5 * g.distance(X), A.n);
}

double disagreement_sampled(const MatrixField& A, const Boundary& g, const Point& X, int samples) {
  static const int primes[kMaxDim] = {2, 3, 5, 7};
  const int n = A.n;
  double rho = 0.5 * g.distance(X);
  double best = operator_norm(A.perturbation_at(X), n);
  for (int i = 1; i <= samples; ++i) {
    Point Y = X;
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
      double u = 2.0 * radical_inverse(i, primes[j]) - 1.0;
      Y[j] += rho * u;
      s += u * u;
    }
    if (s >= 1.0) continue;
    best = std::max(best, operator_norm(A.perturbation_at(Y), n));
  }
  return best;
}

// ------------------------------------------------------------------ continuous norm

Json ContinuousNorm::to_json() const {
  Json j;
  j["norm_resolved"] = tagged(norm, Tag::Measured);
  j["collar_sup"] = tagged(collar_sup, Tag::Measured);
  j["collar_divergent"] = collar_divergent;
  j["balls"] = balls.size();
  return j;
}

std::vector<std::pair<Point, double>> carleson_ball_plan(const DyadicTree& t, const RegionConstants& k,
                                                         std::vector<int> generations) {
  std::vector<std::pair<Point, double>> out;
  for (int gk : generations) {
    if (gk < t.k_min() || gk > t.k_max()) continue;
    const auto& gen = t.generation(gk);
    int m = std::min<int>(8, static_cast<int>(gen.size()));
    for (int i = 0; i < m; ++i) {
      const Cube& c = t.cube(gen[(i * gen.size()) / m]);
      Point x = c.center_atom >= 0 ? t.atom(c.center_atom) : c.center;
      double l = std::ldexp(1.0, -gk);
      for (double r : {k.a0 * l, l, k.A0 * l}) out.push_back({x, r});
    }
  }
  return out;
}

ContinuousNorm continuous_norm(const MatrixField& A, const WhitneyGrid& grid, const DyadicTree& t,
                               const std::vector<std::pair<Point, double>>& balls) {
  const int n = grid.n();
  const Boundary& g = *grid.boundary();
  const double d = g.d();
  auto integrand = [&](const Point& X) {
    double a = disagreement(A, g, X);
    if (a == 0.0) return 0.0;
    return a * a * std::pow(g.distance(X), d - n);
  };
  const std::size_t N = grid.size();
  std::vector<double> full(N, 0.0), cbound(N, 0.0);
  parallel_for(N, [&](std::size_t id) {
    const WhitneyBox& w = grid.at(id);
    Box b = w.box(n);
    if (!w.collar) {
      full[id] = gauss_box(b, integrand);
      return;
    }
    // a(X) over the cell is bounded by |E| over the cell grown by the largest delta / 2 it contains.
    double grow = 0.5 * (w.dist + b.diam());
    Box big = b;
    for (int i = 0; i < n; ++i) {
      big.lo[i] -= grow;
      big.hi[i] += grow;
    }
    double s = A.pert.kind == "zero" ? 0.0 : A.pert.matrix_norm() * A.pert.sup_box(big);
    cbound[id] = s == 0.0 ? 0.0 : kInf;
  });

  ContinuousNorm res;
  res.balls.resize(balls.size());
  parallel_for(balls.size(), [&](std::size_t bi) {
    CarlesonBall cb;
    cb.x = balls[bi].first;
    cb.r = balls[bi].second;
    cb.sigma = g.ball_mass(cb.x, cb.r);
    long double acc = 0.0L;
    double col = 0.0;
    std::function<double(const Box&, int)> part = [&](const Box& b, int depth) -> double {
      if (b.distance_to(cb.x) >= cb.r) return 0.0;
      if (farthest(b, cb.x) <= cb.r) return gauss_box(b, integrand);
      if (depth == 0)
        return gauss_box(b, [&](const Point& X) { return dist(X, cb.x, n) < cb.r ? integrand(X) : 0.0; });
      double s = 0.0;
      for (int c = 0; c < (1 << n); ++c) {
        Box sub = b;
        for (int i = 0; i < n; ++i) {
          double m = 0.5 * (b.lo[i] + b.hi[i]);
          if ((c >> i) & 1)
            sub.lo[i] = m;
          else
            sub.hi[i] = m;
        }
        s += part(sub, depth - 1);
      }
      return s;
    };
    for (std::size_t id = 0; id < N; ++id) {
      const WhitneyBox& w = grid.at(id);
      Box b = w.box(n);
      if (b.distance_to(cb.x) >= cb.r) continue;
      if (w.collar) {
        col = std::max(col, cbound[id]);
        continue;
      }
      acc += farthest(b, cb.x) <= cb.r ? full[id] : part(b, 3);
    }
    cb.resolved = static_cast<double>(acc);
    cb.collar = col;
    res.balls[bi] = cb;
  });
  (void)t;
  for (const auto& cb : res.balls) {
    if (cb.sigma <= 0) continue;
    res.norm = std::max(res.norm, cb.value());
    if (cb.collar > 0) {
      res.collar_divergent = true;
      res.collar_sup = kInf;
    }
  }
  return res;
}

// ------------------------------------------------------------------ discrete measure

DiscreteCarleson DiscreteCarleson::build(const RegionSets& R, const MatrixField& A, bool harnack_augment) {
  DiscreteCarleson m;
  const DyadicTree& t = R.tree();
  const WhitneyGrid& G = R.grid();
  const int n = G.n();
  const double d = t.boundary().d();
  m.alpha_.assign(t.cube_count(), 0.0);
  m.wsize_.assign(t.cube_count(), 0);
  m.canon_ = t.canonical_cubes();
  const double norm = A.pert.kind == "zero" ? 0.0 : A.pert.matrix_norm();
  parallel_for(m.canon_.size(), [&](std::size_t i) {
    int q = m.canon_[i];
    std::vector<std::size_t> W = harnack_augment ? R.list_w(q) : R.list_w0(q);
    long double s = 0.0L;
    for (std::size_t id : W) {
      double sup = norm * A.pert.sup_box(G.star(id));
      s += static_cast<long double>(sup) * sup * std::pow(G.at(id).length(), d);
    }
    m.alpha_[q] = static_cast<double>(s);
    m.wsize_[q] = W.size();
  });
  // Copies of a cube share its value.
  for (int q = 0; q < t.cube_count(); ++q) {
    m.alpha_[q] = m.alpha_[t.cube(q).canonical];
    m.wsize_[q] = m.wsize_[t.cube(q).canonical];
  }
  (void)n;
  return m;
}

double DiscreteCarleson::norm(const DyadicTree& t, int q0) const { return restricted_norm(t, Family(t, {}), q0); }

double DiscreteCarleson::restricted_norm(const DyadicTree& t, const Family& F, int q0) const {
  double best = 0.0;
  for (int q : canon_) {
    if (q0 >= 0 && !t.contains(q0, q)) continue;
    long double s = 0.0L;
    for (int p : canon_)
      if (t.contains(q, p) && F.in_sawtooth(t, p)) s += alpha_[p];
    best = std::max(best, static_cast<double>(s / t.cube(q).mass));
  }
  return best;
}

double comparison_constant(const RegionConstants& k) {
  const double sn = std::sqrt(static_cast<double>(k.n));
  return std::pow(41.0 * sn, k.n - k.d) * std::pow(7.0 * sn * k.A2 / k.a0, k.d) * k.cd * k.cd;
}

}  // namespace saw
