#pragma once

#include <memory>
#include <string>
#include <vector>

#include "saw/boundary.hpp"
#include "saw/kdtree.hpp"

namespace saw {

struct Cube {
  int k = 0;      // generation of this copy
  int index = 0;  // position within the generation
  int parent = -1;
  int first_child = -1;
  int n_children = 0;
  int begin = 0, end = 0;  // atom range in depth-first order
  int center_atom = -1;    // -1 when the centre is not an atom (standard cubes)
  Point center{};
  int born = 0;       // oldest generation carrying the same atom set
  int canonical = 0;  // id of that oldest copy
  double mass = 0.0;

  double length() const { return std::ldexp(1.0, -born); }
  int size() const { return end - begin; }
};

enum class TreeMode { Nets, Standard, SelfSimilar };

TreeMode parse_tree_mode(const std::string& s);

// Christ-David cubes on the atoms of Gamma ∩ window, generations k_min..k_max.
// Immutable after build and safe to query concurrently.
class DyadicTree {
 public:
  static DyadicTree build(BoundaryPtr g, int k_min, int k_max, TreeMode mode);
  static DyadicTree build(BoundaryPtr g, int k_min, int k_max);  // mode chosen from the boundary kind

  const Boundary& boundary() const { return *g_; }
  BoundaryPtr boundary_ptr() const { return g_; }
  int k_min() const { return k_min_; }
  int k_max() const { return k_max_; }
  TreeMode mode() const { return mode_; }

  int atom_count() const { return static_cast<int>(atoms_.size()); }
  const Point& atom(int a) const { return atoms_[a]; }
  double atom_mass(int a) const { return mass_[a]; }
  int atom_original(int a) const { return original_[a]; }
  const std::vector<double>& atom_masses() const { return mass_; }
  double min_spacing() const { return min_spacing_; }

  int cube_count() const { return static_cast<int>(cubes_.size()); }
  const Cube& cube(int q) const { return cubes_[q]; }
  const std::vector<Cube>& cubes() const { return cubes_; }
  const std::vector<int>& generation(int k) const { return gens_[k - k_min_]; }
  std::vector<int> canonical_cubes() const;

  int cube_of(int atom, int k) const { return owner_[k - k_min_][atom]; }
  int last_generation(int q) const;  // youngest generation carrying the set of q
  bool contains(int q, int sub) const {
    return cubes_[q].begin <= cubes_[sub].begin && cubes_[sub].end <= cubes_[q].end;
  }

  int nearest_atom(const Point& x) const { return kd_.nearest(x).first; }

  // One JSON object per cube copy.
  std::vector<Json> export_lines() const;

 private:
  void assemble(const std::vector<std::vector<int>>& labels, const std::vector<std::vector<Point>>& centers,
                const std::vector<std::vector<int>>& center_atoms);

  BoundaryPtr g_;
  int k_min_ = 0, k_max_ = 0;
  TreeMode mode_ = TreeMode::Nets;
  std::vector<Point> atoms_;
  std::vector<double> mass_;
  std::vector<int> original_;
  double min_spacing_ = 0.0;
  std::vector<Cube> cubes_;
  std::vector<std::vector<int>> gens_;
  std::vector<std::vector<int>> owner_;
  KdTree kd_;
};

struct GridReport {
  bool partition = true, nesting = true, unique_ancestor = true, diameter = true, inscribed = true;
  bool thin_boundary = true, mass_bounds = true, children = true, bandwidth = true, proper_child = true;
  double a0 = 0, A0 = 0, a0_fit = 0, A0_fit = 0, cd = 0, ck = 0;
  double zeta = 0, thin_A = 0;
  int max_children = 0;
  double child_bound = 0;
  int max_bandwidth = 0;
  double bandwidth_bound = 0;
  std::vector<std::pair<double, double>> thin_curve;  // (rho, sup thin mass ratio)
  std::vector<std::string> failures;
  bool ok() const {
    return partition && nesting && unique_ancestor && diameter && inscribed && thin_boundary && mass_bounds &&
           children && bandwidth && proper_child;
  }
  Json to_json() const;
};

// Checks the cube axioms at atom level. Declared (a0, A0) are used when positive, fitted otherwise.
GridReport verify_grid(const DyadicTree& t, double a0_declared = 0.0, double A0_declared = 0.0);

// c_K = a0 / (2^((2d+1)/d) C_d^(2/d) A0).
double proper_child_constant(double d, double cd, double a0, double A0);

// ------------------------------------------------------------ families and projections

// Pairwise-disjoint canonical cubes.
class Family {
 public:
  Family() = default;
  Family(const DyadicTree& t, std::vector<int> cubes);
  const std::vector<int>& cubes() const { return cubes_; }
  bool empty() const { return cubes_.empty(); }
  // Oldest generation of the family cube holding each atom; large when uncovered.
  const std::vector<int>& stop_generation() const { return stop_; }
  int owner(int atom) const { return owner_[atom]; }  // index into cubes(), or -1
  // Q in D_F: Q is not contained in any family cube.
  bool in_sawtooth(const DyadicTree& t, int q) const;
  // Q in D_{F,Q0}.
  bool in_local(const DyadicTree& t, int q, int q0) const { return t.contains(q0, q) && in_sawtooth(t, q); }

 private:
  std::vector<int> cubes_;
  std::vector<int> stop_;
  std::vector<int> owner_;
};

constexpr int kNoStop = 1 << 20;

// Coarse-to-fine Bernoulli selection of uncovered cubes below q0 (or everywhere when q0 < 0).
Family random_family(const DyadicTree& t, double p, std::uint64_t seed, int q0 = -1);

double cube_average(const DyadicTree& t, int q, const std::vector<double>& f, const std::vector<double>& mu);

std::vector<double> project_function(const DyadicTree& t, const Family& F, const std::vector<double>& f);
// Atom masses of P_F mu.
std::vector<double> project_measure(const DyadicTree& t, const Family& F, const std::vector<double>& mu);

// mu(F) = w*(F \ ∪Q_j) + sum_j w(F ∩ Q_j) / w(Q_j) w*(P_j), on atoms.
std::vector<double> sawtooth_mu(const DyadicTree& t, const Family& F, const std::vector<double>& omega,
                                const std::vector<double>& omega_star, const std::vector<double>& omega_star_P);
// The same measure after projection, written through w* alone.
std::vector<double> projected_sawtooth_mu(const DyadicTree& t, const Family& F, const std::vector<double>& omega_star,
                                          const std::vector<double>& omega_star_P);

double lp_norm(const std::vector<double>& f, const std::vector<double>& mass, double p);

// sup over cubes Q ∋ a, Q ⊆ q0 of the mu-average of |f|.
std::vector<double> dyadic_maximal(const DyadicTree& t, const std::vector<double>& f, const std::vector<double>& mu,
                                   int q0);

struct StoppingResult {
  Family family;
  double c_mu = 0.0;  // dyadic doubling constant of mu below q0
  double max_average = 0.0;
};

// Maximal cubes below q0 with mu-average of f above tau.
StoppingResult cz_stopping(const DyadicTree& t, const std::vector<double>& f, const std::vector<double>& mu,
                           double tau, int q0);

}  // namespace saw
