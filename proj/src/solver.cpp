#include "saw/solver.hpp"

#include <algorithm>
#include <cmath>

namespace saw {

namespace {

constexpr std::size_t kCoarseSize = 1200;

// Cell-centred linear interpolation weights along one axis.
int axis_stencil(int i, int Nc, int out_idx[2], double out_w[2]) {
  int I = i / 2;
  int J = (i % 2 == 0) ? I - 1 : I + 1;
  if (J < 0 || J >= Nc) {
    out_idx[0] = I;
    out_w[0] = 1.0;
    return 1;
  }
  out_idx[0] = I;
  out_w[0] = 0.75;
  out_idx[1] = J;
  out_w[1] = 0.25;
  return 2;
}

}  // namespace

Multigrid::Multigrid(const SpMat& A, const std::vector<CellIndex>& coords_in, int n, int N) {
  levels_.push_back({A, {}, {}, {}});
  std::vector<CellIndex> coords = coords_in;
  int Nf = N;
  while (static_cast<std::size_t>(levels_.back().A.rows()) > kCoarseSize && Nf >= 4) {
    int Nc = (Nf + 1) / 2;
    const std::size_t rows = coords.size();
    // Enumerate the coarse cells touched by the interpolation, in cell order.
    std::vector<std::vector<std::pair<std::size_t, double>>> stencil(rows);
    std::vector<std::size_t> touched;
    for (std::size_t r = 0; r < rows; ++r) {
      int idx[kMaxDim][2];
      double w[kMaxDim][2];
      int cnt[kMaxDim];
      for (int a = 0; a < n; ++a) cnt[a] = axis_stencil(coords[r][a], Nc, idx[a], w[a]);
      int total = 1;
      for (int a = 0; a < n; ++a) total *= cnt[a];
      for (int t = 0; t < total; ++t) {
        int rem = t;
        std::size_t cell = 0;
        double wt = 1.0;
        std::size_t stride = 1;
        for (int a = 0; a < n; ++a) {
          int s = rem % cnt[a];
          rem /= cnt[a];
          cell += stride * static_cast<std::size_t>(idx[a][s]);
          stride *= Nc;
          wt *= w[a][s];
        }
        stencil[r].push_back({cell, wt});
        touched.push_back(cell);
      }
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(rows * (1u << n));
    for (std::size_t r = 0; r < rows; ++r)
      for (auto& [cell, wt] : stencil[r]) {
        auto col = std::lower_bound(touched.begin(), touched.end(), cell) - touched.begin();
        trip.emplace_back(static_cast<int>(r), static_cast<int>(col), wt);
      }
    SpMat P(static_cast<int>(rows), static_cast<int>(touched.size()));
    P.setFromTriplets(trip.begin(), trip.end());
    P.makeCompressed();
    SpMat R = P.transpose();
    SpMat Ac = R * levels_.back().A * P;
    Ac.prune(0.0);
    Ac.makeCompressed();
    levels_.back().P = P;
    levels_.back().R = R;

    std::vector<CellIndex> cc(touched.size());
    for (std::size_t k = 0; k < touched.size(); ++k) {
      std::size_t cell = touched[k];
      for (int a = 0; a < n; ++a) {
        cc[k][a] = static_cast<int>(cell % Nc);
        cell /= Nc;
      }
    }
    coords.swap(cc);
    Nf = Nc;
    levels_.push_back({Ac, {}, {}, {}});
    if (touched.size() * 2 > rows) break;  // coarsening stalled
  }
  for (auto& L : levels_) {
    L.diag.assign(L.A.rows(), -1);
    for (int r = 0; r < L.A.outerSize(); ++r)
      for (SpMat::InnerIterator it(L.A, r); it; ++it)
        if (it.col() == r) L.diag[r] = static_cast<int>(&it.value() - L.A.valuePtr());
    for (int r = 0; r < L.A.rows(); ++r)
      if (L.diag[r] < 0 || L.A.valuePtr()[L.diag[r]] == 0.0) throw SolverError("multigrid: zero diagonal");
  }
  Eigen::SparseMatrix<double> last = levels_.back().A;
  coarse_.compute(last);
  if (coarse_.info() != Eigen::Success) throw SolverError("multigrid: coarse factorisation failed");
}

void Multigrid::smooth(const Level& L, const Vec& b, Vec& x, bool forward) const {
  const int* outer = L.A.outerIndexPtr();
  const int* inner = L.A.innerIndexPtr();
  const double* val = L.A.valuePtr();
  const int rows = static_cast<int>(L.A.rows());
  auto row = [&](int r) {
    double s = b[r];
    for (int p = outer[r]; p < outer[r + 1]; ++p) s -= val[p] * x[inner[p]];
    double dg = val[L.diag[r]];
    x[r] += s / dg;
  };
  if (forward)
    for (int r = 0; r < rows; ++r) row(r);
  else
    for (int r = rows - 1; r >= 0; --r) row(r);
}

void Multigrid::cycle(int l, const Vec& b, Vec& x) const {
  const Level& L = levels_[l];
  if (l + 1 == static_cast<int>(levels_.size())) {
    std::lock_guard<std::mutex> lock(coarse_mutex_);
    x = coarse_.solve(b);
    return;
  }
  x.setZero(b.size());
  for (int s = 0; s < sweeps_; ++s) smooth(L, b, x, true);
  Vec r = b - L.A * x;
  Vec bc = L.R * r;
  Vec xc;
  cycle(l + 1, bc, xc);
  x += L.P * xc;
  for (int s = 0; s < sweeps_; ++s) smooth(L, b, x, false);
}

void Multigrid::apply(const Vec& r, Vec& z) const { cycle(0, r, z); }

LinearSolver::LinearSolver(SpMat A, const std::vector<CellIndex>& coords, int n, int N, bool symmetric)
    : A_(std::move(A)), symmetric_(symmetric) {
  A_.makeCompressed();
  mg_ = std::make_unique<Multigrid>(A_, coords, n, N);
}

Vec LinearSolver::solve(const Vec& b, SolveStats* stats, double tol, int max_iter) const {
  SolveStats s;
  Vec x = symmetric_ ? pcg(b, s, tol, max_iter) : bicgstab(b, s, tol, max_iter);
  if (stats) *stats = s;
  if (!s.converged)
    throw SolverError(s.method + " did not converge: residual " + std::to_string(s.residual) + " after " +
                      std::to_string(s.iterations) + " iterations");
  return x;
}

Vec LinearSolver::pcg(const Vec& b, SolveStats& s, double tol, int max_iter) const {
  s.method = "pcg-mg";
  Vec x = Vec::Zero(b.size());
  double bn = b.norm();
  if (bn == 0.0) {
    s.converged = true;
    return x;
  }
  Vec r = b, z, p, q;
  mg_->apply(r, z);
  p = z;
  double rz = r.dot(z);
  for (int it = 1; it <= max_iter; ++it) {
    q = A_ * p;
    double alpha = rz / p.dot(q);
    x += alpha * p;
    r -= alpha * q;
    s.iterations = it;
    s.residual = r.norm() / bn;
    if (s.residual <= tol) {
      // Confirm against the true residual to guard against drift.
      s.residual = (b - A_ * x).norm() / bn;
      if (s.residual <= tol * 10.0) {
        s.converged = true;
        return x;
      }
      r = b - A_ * x;
    }
    mg_->apply(r, z);
    double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return x;
}

Vec LinearSolver::bicgstab(const Vec& b, SolveStats& s, double tol, int max_iter) const {
  s.method = "bicgstab-mg";
  Vec x = Vec::Zero(b.size());
  double bn = b.norm();
  if (bn == 0.0) {
    s.converged = true;
    return x;
  }
  Vec r = b, r0 = b, p = Vec::Zero(b.size()), v = Vec::Zero(b.size()), y, z, t, sv;
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  for (int it = 1; it <= max_iter; ++it) {
    double rho_new = r0.dot(r);
    if (rho_new == 0.0) {
      r0 = r;
      rho_new = r0.dot(r);
      p.setZero();
      v.setZero();
      rho = alpha = omega = 1.0;
    }
    double beta = (rho_new / rho) * (alpha / omega);
    p = r + beta * (p - omega * v);
    mg_->apply(p, y);
    v = A_ * y;
    alpha = rho_new / r0.dot(v);
    sv = r - alpha * v;
    s.iterations = it;
    if (sv.norm() / bn <= tol) {
      x += alpha * y;
      s.residual = (b - A_ * x).norm() / bn;
      if (s.residual <= tol * 10.0) {
        s.converged = true;
        return x;
      }
      r = b - A_ * x;
      rho = 1.0;
      alpha = omega = 1.0;
      p.setZero();
      v.setZero();
      r0 = r;
      continue;
    }
    mg_->apply(sv, z);
    t = A_ * z;
    double tt = t.dot(t);
    omega = tt > 0.0 ? t.dot(sv) / tt : 0.0;
    x += alpha * y + omega * z;
    r = sv - omega * t;
    rho = rho_new;
    s.residual = r.norm() / bn;
    if (s.residual <= tol) {
      s.residual = (b - A_ * x).norm() / bn;
      if (s.residual <= tol * 10.0) {
        s.converged = true;
        return x;
      }
      r = b - A_ * x;
      r0 = r;
      rho = alpha = omega = 1.0;
      p.setZero();
      v.setZero();
    }
    if (omega == 0.0) break;
  }
  return x;
}

double asymmetry(const SpMat& A) {
  SpMat T = A.transpose();
  SpMat D = A - T;
  double dmax = 0.0, amax = 0.0;
  for (int k = 0; k < D.nonZeros(); ++k) dmax = std::max(dmax, std::abs(D.valuePtr()[k]));
  for (int k = 0; k < A.nonZeros(); ++k) amax = std::max(amax, std::abs(A.valuePtr()[k]));
  return amax > 0.0 ? dmax / amax : 0.0;
}

}  // namespace saw
