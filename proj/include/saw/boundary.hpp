#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "saw/common.hpp"
#include "saw/kdtree.hpp"

namespace saw {

struct Atom {
  Point x{};
  double mass = 0.0;
};

// A closed d-Ahlfors-David regular set, seen only through oracles.
// All oracles are const and safe to call concurrently once constructed.
class Boundary {
 public:
  Boundary(int n, double d, const Box& window);
  virtual ~Boundary() = default;

  int n() const { return n_; }
  double d() const { return d_; }
  const Box& window() const { return window_; }

  virtual std::string kind() const = 0;
  virtual bool analytic() const { return false; }

  virtual double distance(const Point& x) const = 0;
  virtual Point nearest(const Point& x) const = 0;

  // dist(B, Gamma). The default is a Lipschitz branch-and-bound certified to tol * diam(B).
  virtual double box_distance(const Box& b) const;

  // sigma(Gamma ∩ B(x, r)) for any centre x.
  virtual double ball_mass(const Point& x, double r) const = 0;

  // diam(Gamma ∩ B(x, r)) for x on Gamma.
  virtual double ball_diameter(const Point& x, double r) const;

  // Finite weighted sample of Gamma ∩ window at resolution about 2^-k_leaf.
  virtual std::vector<Atom> atoms(int k_leaf) const = 0;

  // Default leaf generation of dyadic trees on this set.
  virtual int default_k_max() const { return 8; }

  // Point of Gamma ∩ window drawn from sigma, driven by the given uniforms.
  virtual Point sample_point(std::mt19937_64& rng) const = 0;

  // Declared ADR constant C_d.
  virtual double adr_constant() const = 0;

  // Largest radius for which the ADR bounds are meaningful (diameter of a compact set).
  virtual double adr_radius_cap() const { return std::numeric_limits<double>::infinity(); }

  double weight(const Point& x) const;  // delta^(d+1-n)
  bool ball_truncated(const Point& x, double r) const;

  double box_tolerance = 1e-9;

 protected:
  int n_;
  double d_;
  Box window_;
};

using BoundaryPtr = std::shared_ptr<const Boundary>;

// R^d x {0}^(n-d), integer d.
class AffineBoundary : public Boundary {
 public:
  AffineBoundary(int n, int d, const Box& window);
  std::string kind() const override { return "affine"; }
  bool analytic() const override { return true; }
  double distance(const Point& x) const override;
  Point nearest(const Point& x) const override;
  double box_distance(const Box& b) const override;
  double ball_mass(const Point& x, double r) const override;
  double ball_diameter(const Point& x, double r) const override;
  std::vector<Atom> atoms(int k_leaf) const override;
  Point sample_point(std::mt19937_64& rng) const override;
  double adr_constant() const override;
  int dim() const { return di_; }
  static double unit_ball_volume(double d);

 private:
  int di_;
};

// Self-similar Cantor set C in [0,1] with m pieces of ratio r, placed along axis 0.
// cross == "point": Gamma = C x {0}; cross == "axis": Gamma = C x R x {0} (axis 1).
// sigma is normalised so that sigma(C) = 1 per unit length of the extra axis.
class CantorBoundary : public Boundary {
 public:
  CantorBoundary(int n, int m, double ratio, const std::string& cross, int depth, const Box& window,
                 std::optional<double> declared_cd = std::nullopt);
  std::string kind() const override { return "cantor"; }
  bool analytic() const override { return true; }
  double distance(const Point& x) const override;
  Point nearest(const Point& x) const override;
  double box_distance(const Box& b) const override;
  double ball_mass(const Point& x, double r) const override;
  double ball_diameter(const Point& x, double r) const override;
  std::vector<Atom> atoms(int k_leaf) const override;
  int default_k_max() const override;
  Point sample_point(std::mt19937_64& rng) const override;
  double adr_constant() const override { return cd_; }
  double adr_radius_cap() const override { return 1.0; }

  int pieces() const { return m_; }
  double ratio() const { return r_; }
  int depth() const { return depth_; }
  bool cross_axis() const { return cross_axis_; }
  double offset(int i) const { return i * (1.0 - r_) / (m_ - 1); }

  // One-dimensional oracles on C.
  double dist1(double t) const;
  double nearest1(double t) const;
  double succ1(double t) const;  // min C ∩ [t, inf), +inf if empty
  double pred1(double t) const;  // max C ∩ (-inf, t], -inf if empty
  double mass1(double a, double b) const;  // sigma(C ∩ (a, b))
  double interval_distance1(double lo, double hi) const;

 private:
  int m_;
  double r_;
  bool cross_axis_;
  int depth_;
  double cd_;
};

// Graph t -> (t, a sin(w t)) in the first two coordinates; d = 1.
class LipschitzGraphBoundary : public Boundary {
 public:
  LipschitzGraphBoundary(int n, double amplitude, double frequency, const Box& window);
  std::string kind() const override { return "lipschitz-graph"; }
  double distance(const Point& x) const override;
  Point nearest(const Point& x) const override;
  double ball_mass(const Point& x, double r) const override;
  std::vector<Atom> atoms(int k_leaf) const override;
  Point sample_point(std::mt19937_64& rng) const override;
  double adr_constant() const override;
  double lipschitz() const { return a_ * w_; }
  double amplitude() const { return a_; }
  double frequency() const { return w_; }
  Point curve(double t) const;
  double speed(double t) const;

 private:
  double nearest_param(const Point& x) const;
  double a_, w_;
};

// Finite weighted point set standing in for a set of dimension d.
class PointNetBoundary : public Boundary {
 public:
  PointNetBoundary(int n, double d, std::vector<Atom> pts, const Box& window, double declared_cd);
  std::string kind() const override { return "point-net"; }
  double distance(const Point& x) const override;
  Point nearest(const Point& x) const override;
  double ball_mass(const Point& x, double r) const override;
  double ball_diameter(const Point& x, double r) const override;
  std::vector<Atom> atoms(int k_leaf) const override;
  Point sample_point(std::mt19937_64& rng) const override;
  double adr_constant() const override { return cd_; }

 private:
  std::vector<Atom> pts_;
  KdTree tree_;
  std::vector<double> cumulative_;
  double cd_;
};

// Builds a boundary from {"kind": ..., "params": {...}}.
BoundaryPtr make_boundary(const Json& spec, int n, const Box& window);

struct AdrReport {
  double sup_ratio = 0.0;
  double inf_ratio = 0.0;
  double implied_cd = 0.0;
  double min_diam_ratio = 0.0;  // min diam(Delta) / r
  double diam_floor = 0.0;      // 2^(-1/d) C_d^(-2/d)
  int samples = 0;
  int truncated = 0;
  int band_violations = 0;  // against the declared constant
  bool nondegenerate = true;
  Json to_json() const;
};

// Samples are (x on Gamma, r). Requires >= 100 samples spanning >= 4 dyadic scales.
AdrReport adr_estimate(const Boundary& g, const std::vector<std::pair<Point, double>>& samples);

// Deterministic sample plan for adr_estimate.
std::vector<std::pair<Point, double>> adr_sample_plan(const Boundary& g, int count, double r_max, int scales,
                                                     std::uint64_t seed);

struct Corkscrew {
  Point X{};
  double c = 0.0;
};

// Maximises min(delta(X), r - |X - x|) / r over B(x, r).
Corkscrew corkscrew_point(const Boundary& g, const Point& x, double r, double floor = 1e-6);

struct Ball {
  Point center{};
  double radius = 0.0;
};

struct HarnackChain {
  std::vector<Ball> balls;
  Point Y1{}, Y2{};
  double segment_distance = 0.0;  // certified lower bound of delta on [Y1, Y2]
  double c_h = 0.0;               // achieved constant in radius = c_H Lambda^(-d/(n-1-d)) s / 2
};

// Well-tempered chain joining X1 and X2 with delta(X_i) >= s and |X1 - X2| <= Lambda s.
HarnackChain harnack_chain(const Boundary& g, const Point& X1, const Point& X2, double s, double lambda);

// Certified lower bound of delta over the segment [a, b].
double segment_min_distance(const Boundary& g, const Point& a, const Point& b);

struct MeasureResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
};

// m(E) = ∫_E delta^(d+1-n) for a box.
MeasureResult m_box(const Boundary& g, const Box& b, double rel_tol = 1e-4);
// m(B(X, r)).
MeasureResult m_ball(const Boundary& g, const Point& X, double r, double rel_tol = 1e-4);

struct RegimeSample {
  double ratio = 0.0;  // m / (r^n delta^(d+1-n)) or m / r^(d+1)
  bool far = false;    // delta(X) >= alpha r
};

RegimeSample m_regime(const Boundary& g, const Point& X, double r, double alpha, double rel_tol = 1e-4);

}  // namespace saw
