#include "saw/whitney.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace saw {

Box WhitneyBox::box(int n) const {
  Box b;
  b.n = n;
  double s = length();
  for (int i = 0; i < n; ++i) {
    b.lo[i] = static_cast<double>(idx[i]) * s;
    b.hi[i] = static_cast<double>(idx[i] + 1) * s;
  }
  return b;
}

int window_alignment(const Box& window) {
  for (int k = -30; k <= 40; ++k) {
    bool ok = true;
    for (int i = 0; i < window.n && ok; ++i) {
      double a = std::ldexp(window.lo[i], k), b = std::ldexp(window.hi[i], k);
      ok = a == std::floor(a) && b == std::floor(b);
    }
    if (ok) return k;
  }
  throw ConfigError("window corners are not dyadic rationals");
}

std::size_t WhitneyGrid::KeyHash::operator()(const std::pair<int, Index>& key) const {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(key.first);
  for (auto v : key.second) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

namespace {

void subdivide(const Boundary& g, int n, int k, const Index& idx, int k_leaf, std::vector<WhitneyBox>& out) {
  WhitneyBox w;
  w.k = k;
  w.idx = idx;
  Box b = w.box(n);
  w.dist = g.box_distance(b);
  if (4.0 * b.diam() <= w.dist) {
    out.push_back(w);
    return;
  }
  if (k >= k_leaf) {
    w.collar = true;
    out.push_back(w);
    return;
  }
  for (int c = 0; c < (1 << n); ++c) {
    Index child{};
    for (int i = 0; i < n; ++i) child[i] = 2 * idx[i] + ((c >> i) & 1);
    subdivide(g, n, k + 1, child, k_leaf, out);
  }
}

}  // namespace

WhitneyGrid WhitneyGrid::decompose(const BoundaryPtr& g, const Box& window, const WhitneyOptions& opt) {
  WhitneyGrid grid;
  grid.g_ = g;
  grid.window_ = window;
  grid.n_ = window.n;
  const int n = window.n;
  grid.theta_ = opt.theta > 0.0 ? opt.theta : 1.0 / (32.0 * std::sqrt(static_cast<double>(n)));
  if (!(grid.theta_ < 1.0 / (16.0 * std::sqrt(static_cast<double>(n)))))
    throw ConfigError("whitney.theta must lie in (0, 1/(16 sqrt n))");
  grid.k_top_ = window_alignment(window);
  grid.k_leaf_ = opt.k_leaf;
  if (grid.k_leaf_ < grid.k_top_) throw ConfigError("whitney leaf level is coarser than the window alignment");

  Index lo{}, count{};
  std::size_t tops = 1;
  for (int i = 0; i < n; ++i) {
    lo[i] = static_cast<std::int64_t>(std::ldexp(window.lo[i], grid.k_top_));
    count[i] = static_cast<std::int64_t>(std::ldexp(window.hi[i], grid.k_top_)) - lo[i];
    tops *= static_cast<std::size_t>(count[i]);
  }
  std::vector<std::vector<WhitneyBox>> parts(tops);
  parallel_for(tops, [&](std::size_t t) {
    Index idx{};
    std::size_t r = t;
    for (int i = 0; i < n; ++i) {
      idx[i] = lo[i] + static_cast<std::int64_t>(r % count[i]);
      r /= count[i];
    }
    subdivide(*g, n, grid.k_top_, idx, grid.k_leaf_, parts[t]);
  });
  for (auto& p : parts) grid.boxes_.insert(grid.boxes_.end(), p.begin(), p.end());

  grid.lookup_.reserve(grid.boxes_.size());
  for (std::size_t i = 0; i < grid.boxes_.size(); ++i) {
    const auto& b = grid.boxes_[i];
    grid.lookup_.emplace(std::make_pair(b.k, b.idx), i);
    if (b.collar)
      grid.collar_volume_ += std::pow(b.length(), n);
    else
      ++grid.whitney_count_;
  }
  double frac = grid.collar_volume_ / window.volume();
  if (frac > opt.collar_warn) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "collar cells cover %.6g of the window (measure %.6g) at leaf level %d", frac,
                  grid.collar_volume_, grid.k_leaf_);
    grid.warnings_.emplace_back(buf);
  }
  return grid;
}

long WhitneyGrid::find(int k, const Index& idx) const {
  auto it = lookup_.find(std::make_pair(k, idx));
  return it == lookup_.end() ? -1 : static_cast<long>(it->second);
}

long WhitneyGrid::box_containing(const Point& x) const {
  if (!window_.contains_half_open(x)) return -1;
  for (int k = k_top_; k <= k_leaf_; ++k) {
    Index idx{};
    for (int i = 0; i < n_; ++i) idx[i] = static_cast<std::int64_t>(std::floor(std::ldexp(x[i], k)));
    long id = find(k, idx);
    if (id >= 0) return id;
  }
  return -1;
}

void WhitneyGrid::collect_touching(std::size_t id, int k_from, int k_to, std::vector<std::size_t>& out) const {
  const WhitneyBox& w = boxes_[id];
  Box b = w.box(n_);
  for (int k = std::max(k_from, k_top_); k <= std::min(k_to, k_leaf_); ++k) {
    Index lo{}, hi{};
    for (int i = 0; i < n_; ++i) {
      lo[i] = static_cast<std::int64_t>(std::ceil(std::ldexp(b.lo[i], k))) - 1;
      hi[i] = static_cast<std::int64_t>(std::floor(std::ldexp(b.hi[i], k)));
    }
    Index cur = lo;
    while (true) {
      long j = find(k, cur);
      if (j >= 0 && static_cast<std::size_t>(j) != id) out.push_back(static_cast<std::size_t>(j));
      int i = 0;
      for (; i < n_; ++i) {
        if (++cur[i] <= hi[i]) break;
        cur[i] = lo[i];
      }
      if (i == n_) break;
    }
  }
}

std::vector<std::size_t> WhitneyGrid::touching(std::size_t id) const {
  std::vector<std::size_t> out;
  int k = boxes_[id].k;
  collect_touching(id, k - 2, k + 2, out);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Box WhitneyGrid::dilate(std::size_t id, double factor) const {
  return boxes_[id].box(n_).dilated(1.0 + factor);
}

std::string WhitneyGrid::to_csv() const {
  std::ostringstream os;
  os << "k";
  for (int i = 0; i < n_; ++i) os << ",i" << i;
  os << ",dist,collar\n";
  for (const auto& b : boxes_) {
    os << b.k;
    for (int i = 0; i < n_; ++i) os << ',' << b.idx[i];
    os << ',' << fmt_double(b.dist) << ',' << (b.collar ? 1 : 0) << '\n';
  }
  return os.str();
}

bool WhitneyReport::ok() const {
  return lower_violations == 0 && upper_violations == 0 && ratio_violations == 0 && overlap_violations == 0 &&
         star_touch_violations == 0 && star_half_violations == 0 && star_distance_violations == 0 &&
         star_boundary_violations == 0 && tiling_defect < 1e-12;
}

Json WhitneyReport::to_json() const {
  Json j;
  j["boxes"] = boxes;
  j["collar_cells"] = collar_cells;
  j["violations"] = {{"lower_4diam", lower_violations},
                     {"upper_40diam", upper_violations},
                     {"neighbor_ratio", ratio_violations},
                     {"overlap", overlap_violations},
                     {"star_touch", star_touch_violations},
                     {"star_half", star_half_violations},
                     {"star_distance", star_distance_violations},
                     {"star_boundary", star_boundary_violations}};
  j["tiling_defect"] = tagged(tiling_defect, Tag::Measured);
  j["neighbor_ratio_min"] = tagged(min_ratio, Tag::Measured);
  j["neighbor_ratio_max"] = tagged(max_ratio, Tag::Measured);
  j["dist_over_diam_min"] = tagged(min_dist_over_diam, Tag::Measured);
  j["dist_over_diam_max"] = tagged(max_dist_over_diam, Tag::Measured);
  j["collar_fraction"] = tagged(collar_fraction, Tag::Measured);
  j["ok"] = ok();
  return j;
}

WhitneyReport verify_whitney(const WhitneyGrid& grid) {
  const int n = grid.n();
  const double theta = grid.theta();
  const double sn = std::sqrt(static_cast<double>(n));
  const auto& boxes = grid.boxes();
  const std::size_t N = boxes.size();

  struct Local {
    std::size_t lower = 0, upper = 0, ratio = 0, overlap = 0, touch = 0, half = 0, sdist = 0, sbound = 0;
    double rmin = 1e300, rmax = 0.0, dmin = 1e300, dmax = 0.0;
  };
  std::vector<Local> local(N);

  parallel_for(N, [&](std::size_t id) {
    Local& L = local[id];
    const WhitneyBox& w = boxes[id];
    Box b = w.box(n);
    Point c = b.center();
    if (grid.box_containing(c) != static_cast<long>(id)) ++L.overlap;
    if (w.collar) return;
    double diam = b.diam();
    if (4.0 * diam > w.dist) ++L.lower;
    if (w.dist > 40.0 * diam) ++L.upper;
    L.dmin = std::min(L.dmin, w.dist / diam);
    L.dmax = std::max(L.dmax, w.dist / diam);

    // Every touching pair is seen from its smaller member, scanning all coarser levels.
    std::vector<std::size_t> nb;
    grid.collect_touching(id, grid.k_top(), w.k, nb);
    for (std::size_t j : nb) {
      const WhitneyBox& v = boxes[j];
      if (v.collar || v.k > w.k) continue;
      double r = v.length() / w.length();
      L.rmin = std::min(L.rmin, std::min(r, 1.0 / r));
      L.rmax = std::max(L.rmax, std::max(r, 1.0 / r));
      if (r > 4.0) ++L.ratio;
    }

    Box s = b.dilated(1.0 + theta);
    if (grid.boundary()->box_distance(s) < 2.0 * diam) ++L.sbound;
    {
      // delta on the corners and face centres of I*
      int m = 1, centre = 0;
      for (int i = 0; i < n; ++i) {
        centre += m;
        m *= 3;
      }
      for (int t = 0; t < m; ++t) {
        Point x{};
        int r = t;
        for (int i = 0; i < n; ++i) {
          int q = r % 3;
          r /= 3;
          x[i] = q == 0 ? s.lo[i] : (q == 1 ? 0.5 * (s.lo[i] + s.hi[i]) : s.hi[i]);
        }
        if (t == centre) continue;
        if (grid.boundary()->distance(x) > 82.0 * diam) ++L.sbound;
      }
    }

    // Pairs within interaction range: levels k-2..k+2 inside the 3I neighbourhood.
    Box big = b.dilated(3.0);
    for (int k = std::max(grid.k_top(), w.k - 2); k <= std::min(grid.k_leaf(), w.k + 2); ++k) {
      Index lo{}, hi{};
      for (int i = 0; i < n; ++i) {
        lo[i] = static_cast<std::int64_t>(std::floor(std::ldexp(big.lo[i], k)));
        hi[i] = static_cast<std::int64_t>(std::ceil(std::ldexp(big.hi[i], k))) - 1;
      }
      Index cur = lo;
      while (true) {
        long j = grid.find(k, cur);
        if (j >= 0 && static_cast<std::size_t>(j) != id && !boxes[j].collar) {
          Box bj = boxes[j].box(n);
          Box sj = bj.dilated(1.0 + theta);
          bool touch = b.distance_to(bj) == 0.0;
          bool star_meet = s.distance_to(sj) == 0.0;
          if (touch != star_meet) ++L.touch;
          if (!touch && s.distance_to(sj) < (1.0 - 4.0 * sn * theta) * b.distance_to(bj)) ++L.sdist;
          if (s.distance_to(bj.dilated(0.5)) == 0.0) ++L.half;
        }
        int i = 0;
        for (; i < n; ++i) {
          if (++cur[i] <= hi[i]) break;
          cur[i] = lo[i];
        }
        if (i == n) break;
      }
    }
  });

  WhitneyReport rep;
  rep.boxes = grid.whitney_count();
  rep.collar_cells = N - grid.whitney_count();
  rep.min_ratio = 1e300;
  rep.min_dist_over_diam = 1e300;
  for (const auto& L : local) {
    rep.lower_violations += L.lower;
    rep.upper_violations += L.upper;
    rep.ratio_violations += L.ratio;
    rep.overlap_violations += L.overlap;
    rep.star_touch_violations += L.touch;
    rep.star_half_violations += L.half;
    rep.star_distance_violations += L.sdist;
    rep.star_boundary_violations += L.sbound;
    rep.min_ratio = std::min(rep.min_ratio, L.rmin);
    rep.max_ratio = std::max(rep.max_ratio, L.rmax);
    rep.min_dist_over_diam = std::min(rep.min_dist_over_diam, L.dmin);
    rep.max_dist_over_diam = std::max(rep.max_dist_over_diam, L.dmax);
  }
  long double total = 0.0L;
  for (const auto& b : boxes) total += std::pow(static_cast<long double>(b.length()), n);
  long double wv = grid.window().volume();
  rep.tiling_defect = static_cast<double>(std::fabs(wv - total) / wv);
  rep.collar_fraction = grid.collar_volume() / grid.window().volume();
  return rep;
}

}  // namespace saw
