#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "saw/carleson.hpp"
#include "saw/dyadic.hpp"
#include "saw/grid.hpp"
#include "saw/solver.hpp"

namespace saw {

// Finite-volume discretisation of -div(delta^(d+1-n) A grad u) on the interior cells.
// Rows are cell flux balances; A_ID couples interior rows to Dirichlet nodes.
class DiscreteSystem {
 public:
  static std::shared_ptr<const DiscreteSystem> assemble(GridPtr grid, const MatrixField& field);

  const Grid& grid() const { return *grid_; }
  GridPtr grid_ptr() const { return grid_; }
  const MatrixField& field() const { return field_; }
  const SpMat& A_II() const { return A_II_; }
  const SpMat& A_ID() const { return A_ID_; }
  bool symmetric() const { return symmetric_; }
  double asymmetry() const { return asymmetry_; }
  double ellipticity() const { return ellipticity_; }

  // Solvers for A_II and its transpose, built on first use.
  const LinearSolver& solver() const;
  const LinearSolver& adjoint() const;

  // u_I for the given Dirichlet values.
  Vec solve_interior(const std::vector<double>& data, SolveStats* stats = nullptr, double tol = 1e-12) const;
  // A_II^-T e_X for an interior cell.
  Vec adjoint_unit(std::size_t cell, SolveStats* stats = nullptr, double tol = 1e-12) const;

 private:
  GridPtr grid_;
  MatrixField field_;
  SpMat A_II_, A_ID_;
  bool symmetric_ = true;
  double asymmetry_ = 0.0;
  double ellipticity_ = 1.0;
  mutable std::once_flag once_, once_t_;
  mutable std::unique_ptr<LinearSolver> solver_, adjoint_;
};

using SystemPtr = std::shared_ptr<const DiscreteSystem>;

// Collar nodes take f(foot), far nodes take far_value.
std::vector<double> dirichlet_data(const Grid& grid, const std::function<double(const Point&)>& f,
                                   double far_value = 0.0);

struct DiscreteSolution {
  std::vector<double> u;     // every cell; Dirichlet cells hold their data
  std::vector<double> flux;  // net flux into each Dirichlet node
  SolveStats stats;
  double data_min = 0.0, data_max = 0.0;
  double mp_violation = 0.0;  // largest excursion outside [data_min, data_max]
  bool mp_ok = true;
  Json to_json() const;
};

DiscreteSolution solve_dirichlet(const DiscreteSystem& sys, const std::vector<double>& data, double tol = 1e-12);

struct HarmonicMeasure {
  Point pole{};
  long pole_cell = -1;
  int generation = 0;
  std::string mode;
  std::vector<int> cubes;          // the generation's cubes
  std::vector<double> omega;       // omega(Q)
  std::vector<double> sigma;       // sigma(Q)
  std::vector<double> kernel;      // omega(Q) / sigma(Q)
  std::vector<double> atom_omega;  // per atom (adjoint mode only)
  double leakage = 0.0;
  double total = 0.0;              // sum of omega(Q) + leakage
  double min_mass = 0.0;
  bool flagged = false;            // leakage above the bound or negative masses
  SolveStats stats;
  double of_cube(const DyadicTree& t, int q) const;  // any cube at or above the generation
  Json to_json() const;
};

// One adjoint solve (adjoint = true) or one solve per cube.
HarmonicMeasure harmonic_measure(const DiscreteSystem& sys, const DyadicTree& t, const Point& X0, int generation,
                                 bool adjoint = true, double leakage_bound = 0.5);

// Interior cell whose centre is nearest to X; throws when X is not in an interior cell.
std::size_t interior_cell(const Grid& grid, const Point& X);

struct GreenField {
  std::vector<double> g;  // every cell, zero on Dirichlet cells
  long pole_cell = -1;
  double min_value = 0.0;
  double bound_C = 0.0;  // max g |X - Y|^(d-1) over cells at least 4h from the pole
  SolveStats stats;
};

// g(., X0) from A_II g = e_X0, or g^T(., X0) from the transposed system.
GreenField green_function(const DiscreteSystem& sys, const Point& X0, bool transpose = false);

struct DifferenceCheck {
  double lhs = 0.0;           // u1(X) - u0(X)
  double rhs = 0.0;           // -∫ w grad g1^T . E grad u0 by centred differences
  double discrete_rhs = 0.0;  // the same pairing taken with the assembled matrices
  double mismatch = 0.0;      // |lhs - rhs| / |lhs|
  Json to_json() const;
};

DifferenceCheck difference_identity_check(const DiscreteSystem& sys0, const DiscreteSystem& sys1,
                                          const std::vector<double>& data, const Point& X);

// Centred-difference gradient of a cell field at an interior cell.
Point cell_gradient(const Grid& grid, const std::vector<double>& u, std::size_t cell);

struct ConeFunctionals {
  int generation = 0;
  double aperture = 1.0;
  std::vector<int> cubes;
  std::vector<double> N, S;
  std::vector<char> empty;  // cone without interior cells at this h
  Json to_json() const;
};

ConeFunctionals nt_and_square(const Grid& grid, const std::vector<double>& u, const DyadicTree& t, int generation,
                              double aperture);

struct SntReport {
  double p = 2.0;
  std::vector<double> ratios;  // ||S u||_p / ||f||_p per data vector
  double sup = 0.0;
  int skipped_cubes = 0;
  Json to_json() const;
};

SntReport snt_check(const DiscreteSystem& sys, const DyadicTree& t, int generation, double p, int samples,
                    std::uint64_t seed, double aperture = 1.0);

struct RhReport {
  double p = 2.0;
  double characteristic = 0.0;
  int argmax = -1;
  int cubes_checked = 0;
  int excluded = 0;  // finest cubes with numerically zero mass
  Json to_json() const;
};

// sup over cubes Q' ⊆ q0 of (avg k^p)^(1/p) / avg k, averages over the finest cubes of hm.
RhReport rh_characteristic(const DyadicTree& t, const HarmonicMeasure& hm, int q0, double p);
// The same on raw per-cube data.
RhReport rh_characteristic(const DyadicTree& t, const std::vector<int>& cubes, const std::vector<double>& omega,
                           const std::vector<double>& sigma, int q0, double p);

struct AinftyCurve {
  std::vector<double> xi, eps;  // worst omega fraction of unions with sigma fraction <= xi
  double theta = 0.0, C = 0.0;  // eps <= C xi^theta
  Json to_json() const;
};

AinftyCurve ainfty_curve(const DyadicTree& t, const HarmonicMeasure& hm, int q0, int points = 8);

// k^X(y) omega^X0(Delta) / k^X0(y) over the finest cubes inside Delta; returns (min, max).
std::pair<double, double> change_of_poles_band(const HarmonicMeasure& near, const HarmonicMeasure& far,
                                               const std::vector<int>& cube_slots, double far_delta_mass);

// sup over cubes at the generations of (sum over interior cells in B(x_Q, l(Q)) of a^2 delta^(d-n) h^n) / sigma.
double grid_carleson_norm(const Grid& grid, const MatrixField& A, const DyadicTree& t, const std::vector<int>& gens);

struct PerturbRow {
  double eps = 0.0;
  double carleson = 0.0;
  double rh = 0.0;
  double theta = 0.0;
  double leakage = 0.0;
  bool solved = false;
  std::string error;
};

struct PerturbTable {
  double p = 2.0;
  double baseline_rh = 0.0;
  double baseline_theta = 0.0;
  std::vector<PerturbRow> rows;
  Json to_json() const;
  std::string to_csv() const;
};

struct PerturbPlan {
  std::vector<double> eps;
  double p = 2.0;
  int generation = 0;      // finest cube generation for the RH averages
  int q0 = -1;             // top cube; pole at its corkscrew point
  std::vector<int> carleson_generations;
};

PerturbTable perturbation_experiment(GridPtr grid, const MatrixField& A, const DyadicTree& t, const PerturbPlan& plan);

// Interior corkscrew cell centre for Delta(x, r).
Point grid_corkscrew(const Grid& grid, const Point& x, double r);

}  // namespace saw
