#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "saw/boundary.hpp"
#include "saw/common.hpp"

namespace saw {

using Index = std::array<std::int64_t, kMaxDim>;

// Lattice box [idx * 2^-k, (idx + 1) * 2^-k) per axis.
struct WhitneyBox {
  int k = 0;
  Index idx{};
  double dist = 0.0;    // dist(I, Gamma)
  bool collar = false;  // leaf cell too close to Gamma to be a Whitney box

  double length() const { return std::ldexp(1.0, -k); }
  Box box(int n) const;
};

struct WhitneyOptions {
  int k_leaf = 10;
  double theta = 0.0;  // 0 selects 1/(32 sqrt n)
  double collar_warn = 0.05;
};

class WhitneyGrid {
 public:
  static WhitneyGrid decompose(const BoundaryPtr& g, const Box& window, const WhitneyOptions& opt = {});

  int n() const { return n_; }
  const Box& window() const { return window_; }
  const BoundaryPtr& boundary() const { return g_; }
  int k_top() const { return k_top_; }
  int k_leaf() const { return k_leaf_; }
  double theta() const { return theta_; }

  std::size_t size() const { return boxes_.size(); }
  const WhitneyBox& at(std::size_t id) const { return boxes_[id]; }
  const std::vector<WhitneyBox>& boxes() const { return boxes_; }
  std::size_t whitney_count() const { return whitney_count_; }
  double collar_volume() const { return collar_volume_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Box or collar cell id, -1 when absent.
  long find(int k, const Index& idx) const;
  // Id of the cell containing X (half-open), -1 outside the window.
  long box_containing(const Point& x) const;
  // Ids of cells whose closures meet the closure of cell `id` (excluding itself).
  std::vector<std::size_t> touching(std::size_t id) const;
  // Appends touching cells whose generation lies in [k_from, k_to].
  void collect_touching(std::size_t id, int k_from, int k_to, std::vector<std::size_t>& out) const;

  Box dilate(std::size_t id, double factor) const;  // (1 + factor) I
  Box star(std::size_t id) const { return dilate(id, theta_); }
  Box star2(std::size_t id) const { return dilate(id, 2.0 * theta_); }

  std::string to_csv() const;

 private:
  struct KeyHash {
    std::size_t operator()(const std::pair<int, Index>& key) const;
  };

  BoundaryPtr g_;
  Box window_;
  int n_ = 0;
  int k_top_ = 0;
  int k_leaf_ = 0;
  double theta_ = 0.0;
  std::vector<WhitneyBox> boxes_;
  std::unordered_map<std::pair<int, Index>, std::size_t, KeyHash> lookup_;
  std::size_t whitney_count_ = 0;
  double collar_volume_ = 0.0;
  std::vector<std::string> warnings_;
};

struct WhitneyReport {
  std::size_t boxes = 0;
  std::size_t collar_cells = 0;
  std::size_t lower_violations = 0;   // 4 diam I > dist(I, Gamma)
  std::size_t upper_violations = 0;   // dist(I, Gamma) > 40 diam I
  std::size_t ratio_violations = 0;   // touching boxes with side ratio outside [1/4, 4]
  std::size_t overlap_violations = 0;
  std::size_t star_touch_violations = 0;     // I* ∩ J* nonempty iff I, J touch
  std::size_t star_half_violations = 0;      // I* ∩ J/2 empty
  std::size_t star_distance_violations = 0;  // dist(I*, J*) >= (1 - 4 sqrt(n) theta) dist(I, J)
  std::size_t star_boundary_violations = 0;  // 2 diam I <= delta on I*, delta <= 82 diam I
  double tiling_defect = 0.0;                // relative
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  double min_dist_over_diam = 0.0;
  double max_dist_over_diam = 0.0;
  double collar_fraction = 0.0;

  bool ok() const;
  Json to_json() const;
};

WhitneyReport verify_whitney(const WhitneyGrid& grid);

// Smallest k with every window coordinate a multiple of 2^-k.
int window_alignment(const Box& window);

}  // namespace saw
