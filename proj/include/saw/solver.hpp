#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "saw/grid.hpp"

namespace saw {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using Vec = Eigen::VectorXd;

struct SolveStats {
  std::string method;
  int iterations = 0;
  double residual = 0.0;  // ||b - A x|| / ||b||
  bool converged = false;
};

// Cell-centred geometric multigrid with Galerkin coarse operators, used as a preconditioner.
class Multigrid {
 public:
  // coords[i] is the cell index of unknown i on an N^n mesh.
  Multigrid(const SpMat& A, const std::vector<CellIndex>& coords, int n, int N);
  void apply(const Vec& r, Vec& z) const;  // one V-cycle from z = 0
  int levels() const { return static_cast<int>(levels_.size()); }

 private:
  struct Level {
    SpMat A;
    SpMat P;  // to this level from the next coarser one
    SpMat R;
    std::vector<int> diag;
  };
  void cycle(int l, const Vec& b, Vec& x) const;
  void smooth(const Level& L, const Vec& b, Vec& x, bool forward) const;

  std::vector<Level> levels_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> coarse_;
  mutable std::mutex coarse_mutex_;
  int sweeps_ = 2;
};

// Krylov solver on a fixed matrix: conjugate gradients when symmetric, BiCGSTAB otherwise.
class LinearSolver {
 public:
  LinearSolver(SpMat A, const std::vector<CellIndex>& coords, int n, int N, bool symmetric);
  const SpMat& matrix() const { return A_; }
  bool symmetric() const { return symmetric_; }
  Vec solve(const Vec& b, SolveStats* stats = nullptr, double tol = 1e-12, int max_iter = 2000) const;

 private:
  Vec pcg(const Vec& b, SolveStats& s, double tol, int max_iter) const;
  Vec bicgstab(const Vec& b, SolveStats& s, double tol, int max_iter) const;

  SpMat A_;
  bool symmetric_;
  std::unique_ptr<Multigrid> mg_;
};

// max |A - A^T| / max |A|.
double asymmetry(const SpMat& A);

}  // namespace saw
