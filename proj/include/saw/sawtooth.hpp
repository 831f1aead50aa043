#pragma once

#include <memory>
#include <string>
#include <vector>

#include "saw/dyadic.hpp"
#include "saw/kdtree.hpp"
#include "saw/whitney.hpp"

namespace saw {

struct SawtoothParams {
  double eta = 0.0;  // 0 selects c_K / 2
  double K = 0.0;    // 0 selects 500 A0 / a0
  bool enforce = true;          // reject eta >= c_K or K < 500 A0 / a0
  double a0 = 0.0, A0 = 0.0;    // declared cube constants; fitted when zero
  int corkscrew_samples = 48;   // cubes used to measure the corkscrew constant of Gamma
};

struct RegionConstants {
  int n = 0;
  double d = 0.0;
  double a0 = 0, A0 = 0, cd = 0, ck = 0;
  double c = 0;  // measured corkscrew constant of Omega
  double eta = 0, K = 0, theta = 0;
  double a2 = 0, A2 = 0;  // size band of W_Q relative to l(Q)
  double a2_realized = 0, A2_realized = 0;
  double N0 = 0;
  double c_center = 0;  // c / (1000 sqrt n)
  double c1 = 0, c11 = 0, c12 = 0, c13 = 0, c14 = 0;
  double c_simultaneous = 0;  // a2 / (12 sqrt n A2)
  double M0 = 0;
  Json to_json() const;
};

// Whitney regions attached to the cubes of a tree.
class RegionSets {
 public:
  static std::shared_ptr<const RegionSets> build(std::shared_ptr<const DyadicTree> tree,
                                                 std::shared_ptr<const WhitneyGrid> grid,
                                                 const SawtoothParams& params = {});

  const DyadicTree& tree() const { return *tree_; }
  const WhitneyGrid& grid() const { return *grid_; }
  const RegionConstants& constants() const { return k_; }
  const std::vector<std::string>& notes() const { return notes_; }

  // Membership of a Whitney box in W_Q^cs and W_Q^0.
  bool in_cs(int q, std::size_t box) const;
  bool in_w0(int q, std::size_t box) const;
  // Box generations admissible for W_Q^0 given l(Q).
  std::pair<int, int> w0_levels(int q) const;

  std::vector<std::size_t> list_cs(int q) const;
  std::vector<std::size_t> list_w0(int q) const;
  // W_Q^0 plus every box met by the Harnack chains from X_Q to the centres of W_Q^0.
  std::vector<std::size_t> list_w(int q) const;
  // Corkscrew box: the member of W_Q^cs whose centre is farthest from Gamma relative to l(Q); -1 when unresolved.
  long corkscrew_box(int q) const;

  // dist(box, Q) at atom resolution, capped: returns +inf when above cap.
  double box_cube_distance(std::size_t box, int q, double cap) const;
  // Boxes whose closure meets the ball.
  std::vector<std::size_t> boxes_meeting_ball(const Point& c, double r) const;

 private:
  std::vector<std::size_t> candidates(int q, int k_lo, int k_hi, double reach) const;
  // dist(box, Q) <= cap, decided from the cube anchor and radius when possible.
  bool box_near_cube(std::size_t box, int q, double cap) const;

  std::shared_ptr<const DyadicTree> tree_;
  std::shared_ptr<const WhitneyGrid> grid_;
  RegionConstants k_;
  std::vector<std::vector<std::size_t>> by_level_;
  std::vector<std::string> notes_;
  KdTree atoms_kd_;
  std::vector<Point> anchor_;   // x_Q per cube
  std::vector<double> radius_;  // max |a - x_Q| over the atoms of Q

 public:
  const KdTree& atom_index() const { return atoms_kd_; }
};

// Coordinate a + b * theta with a, b exact dyadics.
struct XCoord {
  double a = 0.0, b = 0.0;
};

// (n-1)-rectangle on the hyperplane x[axis] = c, facing `side`.
struct Face {
  int axis = 0;
  int side = 1;
  XCoord c;
  std::array<XCoord, kMaxDim> lo{}, hi{};  // entries for axis unused
  long owner = -1;     // grid cell id
  bool proxy = false;  // collar-cell face standing in for unresolved Gamma-boundary
  Box box(int n, double theta) const;  // degenerate box in R^n
};

struct SawtoothStats {
  std::size_t in_boxes = 0, out_boxes = 0, collar_in = 0, collar_out = 0;
  std::size_t sigma_faces = 0, proxy_faces = 0;
  double min_face_ratio = 0.0;  // min side of a Sigma rectangle / (theta l(I))
};

// Omega_F (q0 < 0) or Omega_{F,Q0}, resolved on the Whitney grid.
class SawtoothDomain {
 public:
  static SawtoothDomain build(std::shared_ptr<const RegionSets> regions, const Family& family, int q0 = -1);

  const RegionSets& regions() const { return *R_; }
  const Family& family() const { return F_; }
  int q0() const { return q0_; }
  int n() const { return R_->grid().n(); }

  // Cell-level state: W_F box or collar cell standing in for a resolved part of the domain.
  bool cell_in(std::size_t id) const { return in_[id] != 0; }
  bool contains(const Point& X) const;
  // dist(X, complement) for X inside: min(delta, dist to faces).
  double boundary_distance(const Point& X) const;
  double face_distance(const Point& X) const;

  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<int>& gamma_atoms() const { return gamma_atoms_; }  // atoms on Gamma ∩ boundary
  bool atom_on_boundary(int a) const { return gamma_mark_[a] != 0; }
  const SawtoothStats& stats() const { return stats_; }
  bool empty() const { return stats_.in_boxes + stats_.collar_in == 0; }

  // sigma*(Delta*(x, r)) split into its Gamma and Sigma parts.
  double star_gamma(const Point& x, double r) const;
  double star_sigma(const Point& x, double r) const;
  double star_ball(const Point& x, double r) const { return star_gamma(x, r) + star_sigma(x, r); }
  // Integral of delta^(d+1-n) over one face intersected with B(x, r).
  double face_integral(const Face& f, const Point& x, double r) const;
  // m(B(X, r) ∩ Omega_F) by quasi-Monte Carlo.
  double m_ball(const Point& X, double r, int samples = 2048) const;

  // Boundary point drawn from the Gamma part (even draws) or from Sigma (odd draws).
  Point sample_boundary(std::mt19937_64& rng, bool sigma) const;

 private:
  std::shared_ptr<const RegionSets> R_;
  Family F_;
  int q0_ = -1;
  std::vector<char> in_;
  std::vector<Face> faces_;
  std::vector<Face> sigma_;  // non-proxy faces
  KdTree face_kd_, sigma_kd_;
  double face_reach_ = 0.0, sigma_reach_ = 0.0;
  std::vector<int> gamma_atoms_;
  std::vector<char> gamma_mark_;
  KdTree gamma_kd_;
  SawtoothStats stats_;
};

struct AxiomPlan {
  int h1_samples = 200;
  int h2_pairs = 20;
  int h3_centers = 100;
  int h3_scales = 3;
  int h5_centers = 40;
  int m_samples = 2048;
  double r_min = 0.0, r_max = 0.0;  // 0 selects defaults from the tree scales
  std::uint64_t seed = 7;
};

struct AxiomReport {
  // H1
  int h1_samples = 0;
  double h1_min_c = 0.0;
  double c1 = 0.0;
  bool h1_ok = false;
  Json h1_witness;
  // H2
  int h2_pairs = 0, h2_found = 0, h2_max_points = 0;
  bool h2_ok = false;
  // H3
  double C3 = 0.0;
  std::vector<double> C3_per_scale;
  bool h3_ok = false;
  // sigma* bounds
  double V1 = 0.0, v2 = 0.0;
  int band_samples = 0;
  bool band_ok = false;
  // H4
  double C4 = 0.0;
  bool h4_ok = false;
  // H5
  double V5 = 0.0;
  std::vector<double> V5_per_scale;
  bool h5_ok = false;
  bool ok() const { return h1_ok && h2_ok && h3_ok && band_ok && h4_ok && h5_ok; }
  Json to_json() const;
};

AxiomReport verify_axioms(const SawtoothDomain& dom, const AxiomPlan& plan = {});

struct StructuralReport {
  // simultaneous corkscrews
  int cs_cubes = 0, cs_found = 0;
  double cs_min_ratio = 0.0;  // achieved radius / r_Q
  // lifted cubes
  int lifted = 0, lifted_found = 0;
  std::array<double, 4> lift_lo{}, lift_hi{};  // l(P)/l(Q), dist(P,Q)/l(Q), dist(P,Gamma)/l(Q), l(I)/l(Q)
  // hidden balls
  int hidden_balls = 0, hidden_violations = 0, hidden_unresolved = 0;
  // atomwise containment chain
  std::size_t chain_violations = 0;
  // Sigma faces
  double min_face_ratio = 0.0;
  std::size_t face_violations = 0;
  // local/global consistency
  int consistency_samples = 0, consistency_violations = 0;
  // Omega_{F,Q0} inside B(x_Q0, 7 sqrt(n) A2 l(Q0)), checked on cell centres
  std::size_t local_ball_violations = 0;
  std::vector<std::string> notes;
  bool ok() const;
  Json to_json() const;
};

StructuralReport structural_props(const SawtoothDomain& dom, std::uint64_t seed = 11, int max_cubes = 24);

// Parses "none", "random p=<prob>" into a family.
Family parse_family(const DyadicTree& t, const std::string& spec, std::uint64_t seed, int q0 = -1);

}  // namespace saw
