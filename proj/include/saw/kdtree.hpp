#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "saw/common.hpp"

namespace saw {

// Static kd-tree over a point cloud. Ties in nearest() go to the lowest index.
class KdTree {
 public:
  KdTree() = default;
  KdTree(const std::vector<Point>& pts, int n) : pts_(pts), n_(n) {
    idx_.resize(pts_.size());
    std::iota(idx_.begin(), idx_.end(), 0);
    if (!idx_.empty()) build(0, static_cast<int>(idx_.size()), 0);
  }

  int size() const { return static_cast<int>(pts_.size()); }
  const Point& point(int i) const { return pts_[i]; }

  // Index of the nearest point and its distance.
  std::pair<int, double> nearest(const Point& x) const {
    int best = -1;
    double best2 = std::numeric_limits<double>::infinity();
    if (!idx_.empty()) nearest_rec(0, static_cast<int>(idx_.size()), x, best, best2);
    return {best, std::sqrt(best2)};
  }

  // Nearest point whose index satisfies keep(i); -1 when none.
  template <class Pred>
  std::pair<int, double> nearest_if(const Point& x, Pred keep) const {
    int best = -1;
    double best2 = std::numeric_limits<double>::infinity();
    if (!idx_.empty()) nearest_if_rec(0, static_cast<int>(idx_.size()), x, keep, best, best2);
    return {best, std::sqrt(best2)};
  }

  // All indices with |p - x| < r, in increasing index order.
  std::vector<int> within(const Point& x, double r) const {
    std::vector<int> out;
    if (!idx_.empty()) within_rec(0, static_cast<int>(idx_.size()), x, r * r, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    int axis;
    double split;
  };

  void build(int lo, int hi, int depth) {
    if (hi - lo <= kLeaf) return;
    int mid = (lo + hi) / 2;
    int axis = widest_axis(lo, hi);
    std::nth_element(idx_.begin() + lo, idx_.begin() + mid, idx_.begin() + hi, [&](int a, int b) {
      if (pts_[a][axis] != pts_[b][axis]) return pts_[a][axis] < pts_[b][axis];
      return a < b;
    });
    axis_of_[key(lo, hi)] = axis;
    build(lo, mid, depth + 1);
    build(mid, hi, depth + 1);
  }

  int widest_axis(int lo, int hi) const {
    int axis = 0;
    double best = -1.0;
    for (int a = 0; a < n_; ++a) {
      double mn = std::numeric_limits<double>::infinity(), mx = -mn;
      for (int i = lo; i < hi; ++i) {
        mn = std::min(mn, pts_[idx_[i]][a]);
        mx = std::max(mx, pts_[idx_[i]][a]);
      }
      if (mx - mn > best) {
        best = mx - mn;
        axis = a;
      }
    }
    return axis;
  }

  static long long key(int lo, int hi) { return (static_cast<long long>(lo) << 32) | static_cast<unsigned>(hi); }

  int axis_at(int lo, int hi) const {
    auto it = axis_of_.find(key(lo, hi));
    return it == axis_of_.end() ? -1 : it->second;
  }

  void consider(int i, const Point& x, int& best, double& best2) const {
    double s = 0.0;
    for (int a = 0; a < n_; ++a) s += (pts_[i][a] - x[a]) * (pts_[i][a] - x[a]);
    if (s < best2 || (s == best2 && i < best)) {
      best2 = s;
      best = i;
    }
  }

  void nearest_rec(int lo, int hi, const Point& x, int& best, double& best2) const {
    if (hi - lo <= kLeaf) {
      for (int i = lo; i < hi; ++i) consider(idx_[i], x, best, best2);
      return;
    }
    int mid = (lo + hi) / 2;
    int axis = axis_at(lo, hi);
    double split = pts_[idx_[mid]][axis];
    double diff = x[axis] - split;
    if (diff < 0) {
      nearest_rec(lo, mid, x, best, best2);
      if (diff * diff <= best2) nearest_rec(mid, hi, x, best, best2);
    } else {
      nearest_rec(mid, hi, x, best, best2);
      if (diff * diff <= best2) nearest_rec(lo, mid, x, best, best2);
    }
  }

  template <class Pred>
  void nearest_if_rec(int lo, int hi, const Point& x, Pred& keep, int& best, double& best2) const {
    if (hi - lo <= kLeaf) {
      for (int i = lo; i < hi; ++i)
        if (keep(idx_[i])) consider(idx_[i], x, best, best2);
      return;
    }
    int mid = (lo + hi) / 2;
    int axis = axis_at(lo, hi);
    double diff = x[axis] - pts_[idx_[mid]][axis];
    if (diff < 0) {
      nearest_if_rec(lo, mid, x, keep, best, best2);
      if (diff * diff <= best2) nearest_if_rec(mid, hi, x, keep, best, best2);
    } else {
      nearest_if_rec(mid, hi, x, keep, best, best2);
      if (diff * diff <= best2) nearest_if_rec(lo, mid, x, keep, best, best2);
    }
  }

  void within_rec(int lo, int hi, const Point& x, double r2, std::vector<int>& out) const {
    if (hi - lo <= kLeaf) {
      for (int i = lo; i < hi; ++i) {
        double s = 0.0;
        for (int a = 0; a < n_; ++a) s += (pts_[idx_[i]][a] - x[a]) * (pts_[idx_[i]][a] - x[a]);
        if (s < r2) out.push_back(idx_[i]);
      }
      return;
    }
    int mid = (lo + hi) / 2;
    int axis = axis_at(lo, hi);
    double diff = x[axis] - pts_[idx_[mid]][axis];
    if (diff < 0 || diff * diff < r2) within_rec(lo, mid, x, r2, out);
    if (diff >= 0 || diff * diff < r2) within_rec(mid, hi, x, r2, out);
  }

  static constexpr int kLeaf = 8;
  std::vector<Point> pts_;
  std::vector<int> idx_;
  int n_ = 0;
  std::unordered_map<long long, int> axis_of_;
};

}  // namespace saw
