#pragma once

#include <vector>

#include "saw/boundary.hpp"

namespace saw {

struct DistanceEval {
  double value = 0.0;     // D(X)
  double integral = 0.0;  // ∫ |X - y|^(-d-alpha) dsigma(y)
  double tail = 0.0;      // analytic estimate of the part of Gamma outside the window
  bool flagged = false;   // tail above 1e-3 of the integral
};

// D(X) = (∫ |X - y|^(-d-alpha) dsigma(y))^(-1/alpha), by quadrature adapted to the boundary kind.
class RegularizedDistance {
 public:
  RegularizedDistance(BoundaryPtr g, double alpha);
  double alpha() const { return alpha_; }
  const Boundary& boundary() const { return *g_; }
  DistanceEval evaluate(const Point& X) const;
  double operator()(const Point& X) const { return evaluate(X).value; }

 private:
  double affine(const Point& X) const;
  double cantor(const Point& X) const;
  DistanceEval graph(const Point& X) const;
  double atoms(const Point& X) const;

  BoundaryPtr g_;
  double alpha_;
  std::vector<Atom> atoms_;  // fallback sample for point sets
};

struct ComparabilityReport {
  double lo = 0.0, hi = 0.0;  // min and max of D / delta
  int samples = 0;
  int flagged = 0;
  Json to_json() const;
};

ComparabilityReport comparability(const RegularizedDistance& D, const std::vector<Point>& X);

struct MagicReport {
  double alpha = 0.0;
  std::vector<double> coarse, fine, extrapolated;  // normalised residuals at steps h, h/2 and Richardson
  double max_extrapolated = 0.0;
  Json to_json() const;
};

// -div(D^(-(n-d-1)) grad D) for D = D_{sigma, n-d-2} by conservative differences with step h_rel delta(X),
// normalised by the size delta^-1 |D^(-(n-d-1)) grad D| of each term.
MagicReport magic_residual(BoundaryPtr g, const std::vector<Point>& X, double h_rel = 0.05);

}  // namespace saw
