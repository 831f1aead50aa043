#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "saw/boundary.hpp"
#include "saw/sawtooth.hpp"
#include "saw/whitney.hpp"

namespace saw {

using Mat = Eigen::Matrix4d;

// Profile of a perturbation E(X) = eps * profile(X) * M.
struct Perturbation {
  std::string kind = "zero";  // zero | constant | oscillatory | bump | band
  Mat M = Mat::Zero();
  double eps = 1.0;
  double frequency = 8.0;            // oscillatory: sin(frequency * x0)
  Point center{};                    // bump
  double radius = 0.25;              // bump support radius
  double band_lo = 0.0, band_hi = 0.0;  // band: delta in [band_lo, band_hi]
  BoundaryPtr boundary;              // band

  double profile(const Point& X) const;
  // sup over a set of |profile|: exact for the ball B(X, rho) and for boxes (band kind bounds from above).
  double sup_ball(const Point& X, double rho, int n) const;
  double sup_box(const Box& b) const;
  double matrix_norm() const;  // operator norm of eps * M
};

// A(X) = base(X) + E(X), with n x n block active.
struct MatrixField {
  int n = 2;
  std::string base = "identity";  // identity | constant | smooth
  Mat base_M = Mat::Identity();
  double smooth_amp = 0.3;
  Perturbation pert;

  Mat operator()(const Point& X) const;
  Mat base_at(const Point& X) const;
  Mat perturbation_at(const Point& X) const;
  MatrixField unperturbed() const;
  MatrixField scaled(double t) const;  // perturbation multiplied by t
  bool symmetric() const;
  // Smallest ellipticity constant C consistent with the sampled (X, xi, zeta).
  double ellipticity(const Box& window, int samples, std::uint64_t seed) const;
};

// Reads {"base": ..., "matrix": [[..]], "perturbation": {"kind": ..., ...}}.
MatrixField make_field(const Json& spec, int n, BoundaryPtr g);

double operator_norm(const Mat& A, int n);

// sup of |E| over B(X, delta(X)/2).
double disagreement(const MatrixField& A, const Boundary& g, const Point& X);
// The same sup from a deterministic low-discrepancy sample.
double disagreement_sampled(const MatrixField& A, const Boundary& g, const Point& X, int samples);

struct CarlesonBall {
  Point x{};
  double r = 0.0;
  double sigma = 0.0;
  double resolved = 0.0;  // ∫∫ over Whitney boxes in B(x, r)
  double collar = 0.0;    // bound for the collar cells in B(x, r)
  double value() const { return resolved / sigma; }
};

struct ContinuousNorm {
  double norm = 0.0;        // sup over the plan, Whitney-resolved part
  double collar_sup = 0.0;  // sup of collar bound / sigma
  bool collar_divergent = false;  // a does not vanish near Gamma: tail grows like log(1/h)
  std::vector<CarlesonBall> balls;
  Json to_json() const;
};

// Plan: cube centres at three generations with radii {a0 l, l, A0 l}, plus any extra balls.
std::vector<std::pair<Point, double>> carleson_ball_plan(const DyadicTree& t, const RegionConstants& k,
                                                         std::vector<int> generations);

ContinuousNorm continuous_norm(const MatrixField& A, const WhitneyGrid& grid, const DyadicTree& t,
                               const std::vector<std::pair<Point, double>>& balls);

class DiscreteCarleson {
 public:
  // alpha_Q for every canonical cube of the regions.
  static DiscreteCarleson build(const RegionSets& R, const MatrixField& A, bool harnack_augment = true);

  double alpha(int q) const { return alpha_[q]; }
  const std::vector<double>& alphas() const { return alpha_; }
  std::size_t region_size(int q) const { return wsize_[q]; }
  // sup over Q ⊆ q0 of m(D_Q) / sigma(Q); q0 < 0 means every cube.
  double norm(const DyadicTree& t, int q0 = -1) const;
  // The same with cubes under the family dropped.
  double restricted_norm(const DyadicTree& t, const Family& F, int q0 = -1) const;
  // Cubes realising the sup, used to extend the continuous ball plan.
  std::vector<int> cubes() const { return canon_; }

 private:
  std::vector<double> alpha_;
  std::vector<std::size_t> wsize_;
  std::vector<int> canon_;
};

// (41 sqrt n)^(n-d) (7 sqrt n A2 / a0)^d C_d^2.
double comparison_constant(const RegionConstants& k);

}  // namespace saw
