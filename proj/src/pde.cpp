#include "saw/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace saw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cell_weight(double delta, double beta) {
  if (beta == 0.0) return 1.0;
  if (delta <= 0.0) return beta < 0.0 ? kInf : 0.0;
  return std::pow(delta, beta);
}

double harmonic_mean(double a, double b) {
  if (std::isinf(a) && std::isinf(b)) return kInf;
  if (std::isinf(a)) return 2.0 * b;
  if (std::isinf(b)) return 2.0 * a;
  if (a + b == 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

Json stats_json(const SolveStats& s) {
  Json j;
  j["method"] = s.method;
  j["iterations"] = s.iterations;
  j["residual"] = tagged(s.residual, Tag::Measured);
  j["converged"] = s.converged;
  return j;
}

}  // namespace

// ------------------------------------------------------------------ assembly

std::shared_ptr<const DiscreteSystem> DiscreteSystem::assemble(GridPtr grid, const MatrixField& field) {
  auto sys = std::make_shared<DiscreteSystem>();
  sys->grid_ = grid;
  sys->field_ = field;
  const Grid& G = *grid;
  const int n = G.n();
  const double h = G.h();
  const double beta = G.boundary().d() + 1.0 - n;
  const double scale = std::pow(h, n - 2);

  double C = field.ellipticity(G.window(), 4000, 17);
  if (!std::isfinite(C)) throw SolverError("operator is not elliptic at a sampled point");
  sys->ellipticity_ = C;

  const auto& interior = G.interior();
  const std::size_t nI = interior.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(nI);
  std::vector<char> bad(nI, 0);
  parallel_for(nI, [&](std::size_t r) {
    const std::size_t P = interior[r];
    const CellIndex c = G.coords(P);
    const Point XP = G.center(P);
    auto& row = rows[r];
    row.reserve(n == 2 ? 12 : 32);
    auto shifted = [&](CellIndex base, int axis, int s) {
      base[axis] += s;
      return G.index(base);
    };
    for (int i = 0; i < n; ++i) {
      for (int s = -1; s <= 1; s += 2) {
        CellIndex cn = c;
        cn[i] += s;
        const std::size_t nb = G.index(cn);
        Point Xf = XP;
        Xf[i] += 0.5 * s * h;
        double wf;
        if (G.cls(nb) == CellClass::Collar)
          wf = harmonic_mean(cell_weight(G.delta(P), beta), cell_weight(G.delta(nb), beta));
        else
          wf = cell_weight(G.boundary().distance(Xf), beta);
        if (!std::isfinite(wf)) wf = 2.0 * cell_weight(G.delta(P), beta);
        Mat Af = field(Xf);
        if (!(Af(i, i) > 0.0)) bad[r] = 1;
        double a = wf * scale;
        row.push_back({nb, -a * Af(i, i)});
        row.push_back({P, a * Af(i, i)});
        for (int j = 0; j < n; ++j) {
          if (j == i || Af(i, j) == 0.0) continue;
          double cx = -s * a * Af(i, j) / 4.0;
          row.push_back({shifted(c, j, 1), cx});
          row.push_back({shifted(c, j, -1), -cx});
          row.push_back({shifted(cn, j, 1), cx});
          row.push_back({shifted(cn, j, -1), -cx});
        }
      }
    }
    std::sort(row.begin(), row.end(), [](auto& x, auto& y) { return x.first < y.first; });
    std::size_t out = 0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (out > 0 && row[out - 1].first == row[k].first)
        row[out - 1].second += row[k].second;
      else
        row[out++] = row[k];
    }
    row.resize(out);
  });
  for (char b : bad)
    if (b) throw SolverError("operator is not elliptic: non-positive diagonal coefficient at a face");

  std::vector<Eigen::Triplet<double>> tI, tD;
  tI.reserve(nI * (n == 2 ? 9 : 19));
  for (std::size_t r = 0; r < nI; ++r)
    for (auto& [cell, v] : rows[r]) {
      if (v == 0.0 && cell != interior[r]) continue;
      if (G.cls(cell) == CellClass::Interior)
        tI.emplace_back(static_cast<int>(r), G.unknown(cell), v);
      else
        tD.emplace_back(static_cast<int>(r), G.dirichlet_slot(cell), v);
    }
  rows.clear();
  sys->A_II_.resize(static_cast<int>(nI), static_cast<int>(nI));
  sys->A_II_.setFromTriplets(tI.begin(), tI.end());
  sys->A_II_.makeCompressed();
  sys->A_ID_.resize(static_cast<int>(nI), static_cast<int>(G.dirichlet().size()));
  sys->A_ID_.setFromTriplets(tD.begin(), tD.end());
  sys->A_ID_.makeCompressed();
  sys->asymmetry_ = saw::asymmetry(sys->A_II_);
  sys->symmetric_ = sys->asymmetry_ <= 1e-13;
  return sys;
}

namespace {

std::vector<CellIndex> interior_coords(const Grid& G) {
  std::vector<CellIndex> out(G.interior().size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = G.coords(G.interior()[k]);
  return out;
}

}  // namespace

const LinearSolver& DiscreteSystem::solver() const {
  std::call_once(once_, [&] {
    solver_ = std::make_unique<LinearSolver>(A_II_, interior_coords(*grid_), grid_->n(), grid_->N(), symmetric_);
  });
  return *solver_;
}

const LinearSolver& DiscreteSystem::adjoint() const {
  if (symmetric_) return solver();
  std::call_once(once_t_, [&] {
    SpMat T = A_II_.transpose();
    adjoint_ = std::make_unique<LinearSolver>(std::move(T), interior_coords(*grid_), grid_->n(), grid_->N(), false);
  });
  return *adjoint_;
}

Vec DiscreteSystem::solve_interior(const std::vector<double>& data, SolveStats* stats, double tol) const {
  if (data.size() != grid_->dirichlet().size()) throw ConfigError("dirichlet data has the wrong length");
  Eigen::Map<const Vec> f(data.data(), static_cast<Eigen::Index>(data.size()));
  Vec b = -(A_ID_ * f);
  return solver().solve(b, stats, tol);
}

Vec DiscreteSystem::adjoint_unit(std::size_t cell, SolveStats* stats, double tol) const {
  if (grid_->cls(cell) != CellClass::Interior) throw ConfigError("pole is not an interior cell");
  Vec e = Vec::Zero(A_II_.rows());
  e[grid_->unknown(cell)] = 1.0;
  return adjoint().solve(e, stats, tol);
}

std::vector<double> dirichlet_data(const Grid& grid, const std::function<double(const Point&)>& f, double far_value) {
  std::vector<double> out(grid.dirichlet().size(), far_value);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::size_t id = grid.dirichlet()[k];
    if (grid.cls(id) == CellClass::Collar) out[k] = f(grid.foot(id));
  }
  return out;
}

// ------------------------------------------------------------------ Dirichlet problem

Json DiscreteSolution::to_json() const {
  Json j;
  j["solver"] = stats_json(stats);
  j["data_min"] = tagged(data_min, Tag::Measured);
  j["data_max"] = tagged(data_max, Tag::Measured);
  j["max_principle_violation"] = tagged(mp_violation, Tag::Measured);
  j["max_principle_ok"] = mp_ok;
  return j;
}

DiscreteSolution solve_dirichlet(const DiscreteSystem& sys, const std::vector<double>& data, double tol) {
  const Grid& G = sys.grid();
  DiscreteSolution sol;
  Vec uI = sys.solve_interior(data, &sol.stats, tol);
  sol.u.assign(G.size(), 0.0);
  for (std::size_t k = 0; k < G.interior().size(); ++k) sol.u[G.interior()[k]] = uI[k];
  for (std::size_t k = 0; k < G.dirichlet().size(); ++k) sol.u[G.dirichlet()[k]] = data[k];
  sol.data_min = data.empty() ? 0.0 : *std::min_element(data.begin(), data.end());
  sol.data_max = data.empty() ? 0.0 : *std::max_element(data.begin(), data.end());
  double viol = 0.0;
  for (Eigen::Index k = 0; k < uI.size(); ++k)
    viol = std::max({viol, uI[k] - sol.data_max, sol.data_min - uI[k]});
  sol.mp_violation = viol;
  sol.mp_ok = viol <= 1e-9 * std::max(1.0, sol.data_max - sol.data_min);
  Vec ones = Vec::Ones(uI.size());
  Vec coupling = sys.A_ID().transpose() * uI;
  Vec colsum = sys.A_ID().transpose() * ones;
  sol.flux.resize(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) sol.flux[k] = -coupling[k] + colsum[k] * data[k];
  return sol;
}

// ------------------------------------------------------------------ harmonic measure

std::size_t interior_cell(const Grid& grid, const Point& X) {
  long c = grid.cell_of(X);
  if (c < 0) throw ConfigError("pole outside the grid window");
  if (grid.cls(c) == CellClass::Interior) return static_cast<std::size_t>(c);
  // Nearest interior cell within two cells.
  const int n = grid.n();
  CellIndex base = grid.coords(c);
  long best = -1;
  double bd = kInf;
  int span = 1;
  for (int i = 0; i < n; ++i) span *= 5;
  for (int t = 0; t < span; ++t) {
    CellIndex q = base;
    int rem = t;
    bool ok = true;
    for (int i = 0; i < n; ++i) {
      q[i] += rem % 5 - 2;
      rem /= 5;
      if (q[i] < 0 || q[i] >= grid.N()) ok = false;
    }
    if (!ok) continue;
    std::size_t id = grid.index(q);
    if (grid.cls(id) != CellClass::Interior) continue;
    double dd = dist(grid.center(id), X, n);
    if (dd < bd) {
      bd = dd;
      best = static_cast<long>(id);
    }
  }
  if (best < 0) throw ConfigError("pole is not near an interior cell");
  return static_cast<std::size_t>(best);
}

double HarmonicMeasure::of_cube(const DyadicTree& t, int q) const {
  double s = 0.0;
  for (std::size_t k = 0; k < cubes.size(); ++k)
    if (t.contains(q, cubes[k])) s += omega[k];
  return s;
}

Json HarmonicMeasure::to_json() const {
  Json j;
  j["mode"] = mode;
  j["pole"] = Json::array();
  for (int i = 0; i < kMaxDim; ++i) j["pole"].push_back(pole[i]);
  j["generation"] = generation;
  j["cubes"] = cubes.size();
  j["leakage"] = tagged(leakage, Tag::Measured);
  j["total"] = tagged(total, Tag::Measured);
  j["min_mass"] = tagged(min_mass, Tag::Measured);
  j["flagged"] = flagged;
  j["solver"] = stats_json(stats);
  return j;
}

HarmonicMeasure harmonic_measure(const DiscreteSystem& sys, const DyadicTree& t, const Point& X0, int generation,
                                 bool adjoint, double leakage_bound) {
  const Grid& G = sys.grid();
  if (generation < t.k_min() || generation > t.k_max()) throw ConfigError("harmonic measure generation out of range");
  HarmonicMeasure hm;
  hm.pole_cell = static_cast<long>(interior_cell(G, X0));
  hm.pole = G.center(hm.pole_cell);
  hm.generation = generation;
  hm.cubes = t.generation(generation);
  const std::size_t nq = hm.cubes.size();
  hm.omega.assign(nq, 0.0);
  hm.sigma.resize(nq);
  for (std::size_t k = 0; k < nq; ++k) hm.sigma[k] = t.cube(hm.cubes[k]).mass;
  const std::vector<int> atoms = G.dirichlet_atoms(t);
  const std::size_t unknown = static_cast<std::size_t>(G.unknown(hm.pole_cell));

  if (adjoint) {
    hm.mode = "adjoint";
    Vec z = sys.adjoint_unit(hm.pole_cell, &hm.stats);
    Vec w = -(sys.A_ID().transpose() * z);
    hm.atom_omega.assign(t.atom_count(), 0.0);
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      if (atoms[k] < 0)
        hm.leakage += w[k];
      else
        hm.atom_omega[atoms[k]] += w[k];
    }
    for (std::size_t k = 0; k < nq; ++k) {
      const Cube& c = t.cube(hm.cubes[k]);
      double s = 0.0;
      for (int a = c.begin; a < c.end; ++a) s += hm.atom_omega[a];
      hm.omega[k] = s;
    }
  } else {
    hm.mode = "per-cube";
    std::vector<int> slot_of_atom(t.atom_count(), -1);
    for (std::size_t k = 0; k < nq; ++k) {
      const Cube& c = t.cube(hm.cubes[k]);
      for (int a = c.begin; a < c.end; ++a) slot_of_atom[a] = static_cast<int>(k);
    }
    std::vector<SolveStats> st(nq + 1);
    std::vector<double> value(nq + 1, 0.0);
    parallel_for(nq + 1, [&](std::size_t k) {
      std::vector<double> data(atoms.size(), 0.0);
      for (std::size_t m = 0; m < atoms.size(); ++m) {
        bool hit = k == nq ? atoms[m] < 0 : (atoms[m] >= 0 && slot_of_atom[atoms[m]] == static_cast<int>(k));
        if (hit) data[m] = 1.0;
      }
      Vec u = sys.solve_interior(data, &st[k]);
      value[k] = u[unknown];
    });
    for (std::size_t k = 0; k < nq; ++k) hm.omega[k] = value[k];
    hm.leakage = value[nq];
    hm.stats = st[0];
    for (auto& s : st) hm.stats.iterations = std::max(hm.stats.iterations, s.iterations);
  }
  hm.kernel.resize(nq);
  hm.total = hm.leakage;
  hm.min_mass = kInf;
  for (std::size_t k = 0; k < nq; ++k) {
    hm.kernel[k] = hm.sigma[k] > 0.0 ? hm.omega[k] / hm.sigma[k] : 0.0;
    hm.total += hm.omega[k];
    hm.min_mass = std::min(hm.min_mass, hm.omega[k]);
  }
  hm.flagged = hm.leakage > leakage_bound || hm.min_mass < -1e-10;
  return hm;
}

// ------------------------------------------------------------------ Green function

GreenField green_function(const DiscreteSystem& sys, const Point& X0, bool transpose) {
  const Grid& G = sys.grid();
  GreenField gf;
  std::size_t cell = interior_cell(G, X0);
  gf.pole_cell = static_cast<long>(cell);
  Vec e = Vec::Zero(G.interior().size());
  e[G.unknown(cell)] = 1.0;
  Vec g = transpose ? sys.adjoint().solve(e, &gf.stats) : sys.solver().solve(e, &gf.stats);
  gf.g.assign(G.size(), 0.0);
  for (std::size_t k = 0; k < G.interior().size(); ++k) gf.g[G.interior()[k]] = g[k];
  const int n = G.n();
  const double d = G.boundary().d();
  const Point Y = G.center(cell);
  gf.min_value = g.size() ? g.minCoeff() : 0.0;
  double C = 0.0;
  for (std::size_t k = 0; k < G.interior().size(); ++k) {
    double r = dist(G.center(G.interior()[k]), Y, n);
    if (r < 4.0 * G.h()) continue;
    C = std::max(C, g[k] * std::pow(r, d - 1.0));
  }
  gf.bound_C = C;
  return gf;
}

// ------------------------------------------------------------------ difference identity

Point cell_gradient(const Grid& grid, const std::vector<double>& u, std::size_t cell) {
  const int n = grid.n();
  CellIndex c = grid.coords(cell);
  Point g{};
  for (int i = 0; i < n; ++i) {
    CellIndex a = c, b = c;
    a[i] += 1;
    b[i] -= 1;
    if (a[i] >= grid.N()) a[i] = c[i];
    if (b[i] < 0) b[i] = c[i];
    double span = (a[i] - b[i]) * grid.h();
    g[i] = span > 0.0 ? (u[grid.index(a)] - u[grid.index(b)]) / span : 0.0;
  }
  return g;
}

Json DifferenceCheck::to_json() const {
  Json j;
  j["lhs"] = tagged(lhs, Tag::Measured);
  j["rhs"] = tagged(rhs, Tag::Measured);
  j["discrete_rhs"] = tagged(discrete_rhs, Tag::Measured);
  j["mismatch"] = tagged(mismatch, Tag::Measured);
  return j;
}

DifferenceCheck difference_identity_check(const DiscreteSystem& sys0, const DiscreteSystem& sys1,
                                          const std::vector<double>& data, const Point& X) {
  const Grid& G = sys0.grid();
  if (&G != &sys1.grid()) throw ConfigError("difference identity needs both operators on one grid");
  const int n = G.n();
  const double beta = G.boundary().d() + 1.0 - n;
  auto E = [&](const Point& Y) -> Mat { return sys1.field()(Y) - sys0.field()(Y); };
  std::size_t cell = interior_cell(G, X);
  {
    // E must vanish on a neighbourhood of X.
    CellIndex c = G.coords(cell);
    int span = 1;
    for (int i = 0; i < n; ++i) span *= 5;
    for (int t = 0; t < span; ++t) {
      CellIndex q = c;
      int rem = t;
      bool ok = true;
      for (int i = 0; i < n; ++i) {
        q[i] += rem % 5 - 2;
        rem /= 5;
        if (q[i] < 0 || q[i] >= G.N()) ok = false;
      }
      if (ok && E(G.center(G.index(q))).cwiseAbs().maxCoeff() != 0.0)
        throw ConfigError("perturbation support reaches the evaluation point");
    }
  }
  DiscreteSolution u0 = solve_dirichlet(sys0, data);
  DiscreteSolution u1 = solve_dirichlet(sys1, data);
  DifferenceCheck dc;
  dc.lhs = u1.u[cell] - u0.u[cell];

  Vec z = sys1.adjoint_unit(cell);
  std::vector<double> zf(G.size(), 0.0);
  for (std::size_t k = 0; k < G.interior().size(); ++k) zf[G.interior()[k]] = z[k];

  const std::size_t nI = G.interior().size();
  std::vector<double> part(nI, 0.0);
  const double vol = G.cell_volume();
  parallel_for(nI, [&](std::size_t k) {
    std::size_t id = G.interior()[k];
    Point Y = G.center(id);
    Mat Ey = E(Y);
    if (Ey.cwiseAbs().maxCoeff() == 0.0) return;
    Point gu = cell_gradient(G, u0.u, id), gz = cell_gradient(G, zf, id);
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) s += gz[i] * Ey(i, j) * gu[j];
    part[k] = -cell_weight(G.delta(id), beta) * s * vol;
  });
  long double acc = 0.0L;
  for (double v : part) acc += v;
  dc.rhs = static_cast<double>(acc);

  Vec u0I(nI), u0D(G.dirichlet().size());
  for (std::size_t k = 0; k < nI; ++k) u0I[k] = u0.u[G.interior()[k]];
  for (std::size_t k = 0; k < G.dirichlet().size(); ++k) u0D[k] = u0.u[G.dirichlet()[k]];
  Vec r = (sys1.A_II() * u0I - sys0.A_II() * u0I) + (sys1.A_ID() * u0D - sys0.A_ID() * u0D);
  dc.discrete_rhs = -z.dot(r);
  dc.mismatch = dc.lhs != 0.0 ? std::abs(dc.lhs - dc.rhs) / std::abs(dc.lhs) : std::abs(dc.rhs);
  return dc;
}

// ------------------------------------------------------------------ cones

Json ConeFunctionals::to_json() const {
  Json j;
  j["generation"] = generation;
  j["aperture"] = aperture;
  j["cubes"] = cubes.size();
  int e = 0;
  for (char c : empty) e += c;
  j["empty_cones"] = e;
  return j;
}

ConeFunctionals nt_and_square(const Grid& grid, const std::vector<double>& u, const DyadicTree& t, int generation,
                              double aperture) {
  ConeFunctionals cf;
  cf.generation = generation;
  cf.aperture = aperture;
  cf.cubes = t.generation(generation);
  const std::size_t nq = cf.cubes.size();
  cf.N.assign(nq, 0.0);
  cf.S.assign(nq, 0.0);
  cf.empty.assign(nq, 1);
  const int n = grid.n();
  const double vol = grid.cell_volume();
  // Cell data shared by every cone.
  const auto& interior = grid.interior();
  std::vector<Point> centers(interior.size());
  std::vector<double> grad2(interior.size());
  parallel_for(interior.size(), [&](std::size_t k) {
    centers[k] = grid.center(interior[k]);
    Point g = cell_gradient(grid, u, interior[k]);
    grad2[k] = dot(g, g, n) * std::pow(grid.delta(interior[k]), 2.0 - n) * vol;
  });
  parallel_for(nq, [&](std::size_t q) {
    const Point& x = t.cube(cf.cubes[q]).center;
    double Nv = 0.0;
    long double S2 = 0.0L;
    bool any = false;
    for (std::size_t k = 0; k < interior.size(); ++k) {
      double dl = grid.delta(interior[k]);
      if (dist(centers[k], x, n) >= (1.0 + aperture) * dl) continue;
      any = true;
      Nv = std::max(Nv, std::abs(u[interior[k]]));
      S2 += grad2[k];
    }
    cf.N[q] = Nv;
    cf.S[q] = std::sqrt(static_cast<double>(S2));
    cf.empty[q] = any ? 0 : 1;
  });
  return cf;
}

Json SntReport::to_json() const {
  Json j;
  j["p"] = p;
  j["samples"] = ratios.size();
  j["sup_ratio"] = tagged(sup, Tag::Measured);
  j["skipped_cubes"] = skipped_cubes;
  return j;
}

SntReport snt_check(const DiscreteSystem& sys, const DyadicTree& t, int generation, double p, int samples,
                    std::uint64_t seed, double aperture) {
  const Grid& G = sys.grid();
  const auto& cubes = t.generation(generation);
  std::vector<int> slot(t.cube_count(), -1);
  for (std::size_t k = 0; k < cubes.size(); ++k) slot[cubes[k]] = static_cast<int>(k);
  const std::vector<int> atoms = G.dirichlet_atoms(t);
  std::vector<std::vector<double>> values(samples);
  std::mt19937_64 rng(seed);
  for (auto& v : values) {
    v.resize(cubes.size());
    for (double& x : v) x = uniform01(rng);
  }
  SntReport rep;
  rep.p = p;
  rep.ratios.assign(samples, 0.0);
  std::vector<int> skipped(samples, 0);
  for (int s = 0; s < samples; ++s) {
    std::vector<double> data(atoms.size(), 0.0);
    for (std::size_t m = 0; m < atoms.size(); ++m)
      if (atoms[m] >= 0) data[m] = values[s][slot[t.cube_of(atoms[m], generation)]];
    DiscreteSolution sol = solve_dirichlet(sys, data);
    ConeFunctionals cf = nt_and_square(G, sol.u, t, generation, aperture);
    double num = 0.0, den = 0.0;
    for (std::size_t q = 0; q < cubes.size(); ++q) {
      double sg = t.cube(cubes[q]).mass;
      den += std::pow(values[s][q], p) * sg;
      if (cf.empty[q]) {
        ++skipped[s];
        continue;
      }
      num += std::pow(cf.S[q], p) * sg;
    }
    rep.ratios[s] = den > 0.0 ? std::pow(num, 1.0 / p) / std::pow(den, 1.0 / p) : 0.0;
  }
  for (int s = 0; s < samples; ++s) {
    rep.sup = std::max(rep.sup, rep.ratios[s]);
    rep.skipped_cubes = std::max(rep.skipped_cubes, skipped[s]);
  }
  return rep;
}

// ------------------------------------------------------------------ RH_p and A_infinity

Json RhReport::to_json() const {
  Json j;
  j["p"] = p;
  j["characteristic"] = tagged(characteristic, Tag::Measured);
  j["argmax_cube"] = argmax;
  j["cubes_checked"] = cubes_checked;
  j["excluded"] = excluded;
  return j;
}

RhReport rh_characteristic(const DyadicTree& t, const std::vector<int>& cubes, const std::vector<double>& omega,
                           const std::vector<double>& sigma, int q0, double p) {
  RhReport rep;
  rep.p = p;
  if (cubes.empty()) return rep;
  const int kf = t.cube(cubes[0]).k;
  const int k0 = q0 >= 0 ? t.cube(q0).k : t.k_min();
  double wmax = 0.0;
  for (double w : omega) wmax = std::max(wmax, w);
  struct Acc {
    double sigma = 0.0, omega = 0.0, kp = 0.0;
  };
  std::map<int, Acc> acc;
  for (std::size_t k = 0; k < cubes.size(); ++k) {
    int q = cubes[k];
    if (q0 >= 0 && !t.contains(q0, q)) continue;
    if (!(omega[k] > 1e-14 * wmax) || sigma[k] <= 0.0) {
      ++rep.excluded;
      continue;
    }
    double kern = omega[k] / sigma[k];
    for (int g = k0; g <= kf; ++g) {
      Acc& a = acc[t.cube_of(t.cube(q).begin, g)];
      a.sigma += sigma[k];
      a.omega += omega[k];
      a.kp += std::pow(kern, p) * sigma[k];
    }
  }
  for (auto& [q, a] : acc) {
    if (a.omega <= 0.0) continue;
    double avg_p = std::pow(a.kp / a.sigma, 1.0 / p);
    double avg = a.omega / a.sigma;
    double v = avg_p / avg;
    ++rep.cubes_checked;
    if (v > rep.characteristic) {
      rep.characteristic = v;
      rep.argmax = q;
    }
  }
  return rep;
}

RhReport rh_characteristic(const DyadicTree& t, const HarmonicMeasure& hm, int q0, double p) {
  return rh_characteristic(t, hm.cubes, hm.omega, hm.sigma, q0, p);
}

Json AinftyCurve::to_json() const {
  Json j;
  j["xi"] = xi;
  j["eps"] = eps;
  j["theta"] = tagged(theta, Tag::Fitted);
  j["C"] = tagged(C, Tag::Fitted);
  return j;
}

AinftyCurve ainfty_curve(const DyadicTree& t, const HarmonicMeasure& hm, int q0, int points) {
  AinftyCurve cv;
  for (int j = 1; j <= points; ++j) cv.xi.push_back(std::ldexp(1.0, -j));
  cv.eps.assign(points, 0.0);
  if (hm.cubes.empty()) return cv;
  const int kf = hm.generation;
  const int k0 = q0 >= 0 ? t.cube(q0).k : t.k_min();
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t k = 0; k < hm.cubes.size(); ++k) {
    int q = hm.cubes[k];
    if (q0 >= 0 && !t.contains(q0, q)) continue;
    if (hm.sigma[k] <= 0.0) continue;
    for (int g = k0; g < kf; ++g) members[t.cube_of(t.cube(q).begin, g)].push_back(k);
  }
  for (auto& [q, list] : members) {
    if (list.size() < 4) continue;
    std::vector<std::size_t> order = list;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      double ka = hm.omega[a] / hm.sigma[a], kb = hm.omega[b] / hm.sigma[b];
      if (ka != kb) return ka > kb;
      return a < b;
    });
    double S = 0.0, W = 0.0;
    for (std::size_t k : order) {
      S += hm.sigma[k];
      W += std::max(0.0, hm.omega[k]);
    }
    if (W <= 0.0) continue;
    double s = 0.0, w = 0.0;
    for (std::size_t k : order) {
      double s2 = s + hm.sigma[k] / S;
      double w2 = w + std::max(0.0, hm.omega[k]) / W;
      for (int j = 0; j < points; ++j)
        if (s2 <= cv.xi[j] * (1.0 + 1e-12)) cv.eps[j] = std::max(cv.eps[j], w2);
      s = s2;
      w = w2;
    }
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (int j = 0; j < points; ++j) {
    if (cv.eps[j] <= 0.0) continue;
    double x = std::log(cv.xi[j]), y = std::log(cv.eps[j]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m >= 2) {
    cv.theta = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    for (int j = 0; j < points; ++j)
      if (cv.eps[j] > 0.0) cv.C = std::max(cv.C, cv.eps[j] / std::pow(cv.xi[j], cv.theta));
  }
  return cv;
}

std::pair<double, double> change_of_poles_band(const HarmonicMeasure& near, const HarmonicMeasure& far,
                                               const std::vector<int>& cube_slots, double far_delta_mass) {
  double lo = kInf, hi = 0.0;
  for (int s : cube_slots) {
    if (!(near.omega[s] > 0.0) || !(far.omega[s] > 0.0)) continue;
    double v = near.omega[s] * far_delta_mass / far.omega[s];
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

// ------------------------------------------------------------------ perturbation experiment

double grid_carleson_norm(const Grid& grid, const MatrixField& A, const DyadicTree& t, const std::vector<int>& gens) {
  const int n = grid.n();
  const Boundary& g = grid.boundary();
  const double d = g.d();
  const double vol = grid.cell_volume();
  std::vector<int> cubes;
  for (int k : gens)
    for (int q : t.generation(k)) cubes.push_back(q);
  std::vector<double> val(cubes.size(), 0.0);
  parallel_for(cubes.size(), [&](std::size_t i) {
    const Cube& c = t.cube(cubes[i]);
    const double r = c.length();
    CellIndex lo{}, hi{};
    for (int a = 0; a < n; ++a) {
      lo[a] = std::max(0, static_cast<int>(std::floor((c.center[a] - r - grid.window().lo[a]) / grid.h())));
      hi[a] = std::min(grid.N() - 1, static_cast<int>(std::floor((c.center[a] + r - grid.window().lo[a]) / grid.h())));
      if (lo[a] > hi[a]) return;
    }
    long double acc = 0.0L;
    CellIndex q = lo;
    while (true) {
      std::size_t id = grid.index(q);
      if (grid.cls(id) == CellClass::Interior) {
        Point X = grid.center(id);
        if (dist(X, c.center, n) < r) {
          double a = disagreement(A, g, X);
          if (a != 0.0) acc += a * a * std::pow(grid.delta(id), d - n) * vol;
        }
      }
      int a = 0;
      while (a < n && ++q[a] > hi[a]) {
        q[a] = lo[a];
        ++a;
      }
      if (a == n) break;
    }
    double s = g.ball_mass(c.center, r);
    val[i] = s > 0.0 ? static_cast<double>(acc) / s : 0.0;
  });
  double sup = 0.0;
  for (double v : val) sup = std::max(sup, v);
  return sup;
}

Point grid_corkscrew(const Grid& grid, const Point& x, double r) {
  Corkscrew c = corkscrew_point(grid.boundary(), x, r);
  return grid.center(interior_cell(grid, c.X));
}

Json PerturbTable::to_json() const {
  Json j;
  j["p"] = p;
  j["baseline_rh"] = tagged(baseline_rh, Tag::Measured);
  j["baseline_theta"] = tagged(baseline_theta, Tag::Fitted);
  j["rows"] = Json::array();
  for (auto& r : rows) {
    Json e;
    e["eps"] = r.eps;
    e["carleson"] = tagged(r.carleson, Tag::Measured);
    e["rh"] = tagged(r.rh, Tag::Measured);
    e["theta"] = tagged(r.theta, Tag::Fitted);
    e["leakage"] = tagged(r.leakage, Tag::Measured);
    e["solved"] = r.solved;
    if (!r.error.empty()) e["error"] = r.error;
    j["rows"].push_back(e);
  }
  return j;
}

std::string PerturbTable::to_csv() const {
  std::ostringstream os;
  os << "eps,carleson,rh,theta,leakage,solved\n";
  for (auto& r : rows)
    os << fmt_double(r.eps) << ',' << fmt_double(r.carleson) << ',' << fmt_double(r.rh) << ',' << fmt_double(r.theta)
       << ',' << fmt_double(r.leakage) << ',' << (r.solved ? 1 : 0) << '\n';
  return os.str();
}

PerturbTable perturbation_experiment(GridPtr grid, const MatrixField& A, const DyadicTree& t, const PerturbPlan& plan) {
  PerturbTable tab;
  tab.p = plan.p;
  int q0 = plan.q0 >= 0 ? plan.q0 : t.generation(t.k_min()).front();
  const Cube& top = t.cube(q0);
  Point pole = grid_corkscrew(*grid, top.center, top.length());
  MatrixField base = A.unperturbed();
  auto sys0 = DiscreteSystem::assemble(grid, base);
  HarmonicMeasure hm0 = harmonic_measure(*sys0, t, pole, plan.generation);
  RhReport rh0 = rh_characteristic(t, hm0, q0, plan.p);
  AinftyCurve cv0 = ainfty_curve(t, hm0, q0);
  tab.baseline_rh = rh0.characteristic;
  tab.baseline_theta = cv0.theta;
  for (double eps : plan.eps) {
    PerturbRow row;
    row.eps = eps;
    MatrixField Ae = A.scaled(eps);
    row.carleson = grid_carleson_norm(*grid, Ae, t, plan.carleson_generations);
    try {
      auto sys = DiscreteSystem::assemble(grid, Ae);
      HarmonicMeasure hm = harmonic_measure(*sys, t, pole, plan.generation);
      row.rh = rh_characteristic(t, hm, q0, plan.p).characteristic;
      row.theta = ainfty_curve(t, hm, q0).theta;
      row.leakage = hm.leakage;
      row.solved = true;
    } catch (const SolverError& e) {
      row.error = e.what();
    }
    tab.rows.push_back(row);
  }
  return tab;
}

}  // namespace saw
