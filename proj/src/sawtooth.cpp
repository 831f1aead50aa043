#include "saw/sawtooth.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cstdio>
#include <limits>
#include <map>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace saw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sqrt_n(int n) { return std::sqrt(static_cast<double>(n)); }

double unit_ball(int n) { return AffineBoundary::unit_ball_volume(n); }

int cmp(const XCoord& x, const XCoord& y, double theta) {
  if (x.a == y.a && x.b == y.b) return 0;
  long double v = (static_cast<long double>(x.a) - y.a) + (static_cast<long double>(x.b) - y.b) * theta;
  return v < 0 ? -1 : (v > 0 ? 1 : 0);
}

double value(const XCoord& x, double theta) { return x.a + x.b * theta; }

struct Region {
  std::array<XCoord, kMaxDim> lo{}, hi{};
};

// Star of a Whitney box, the cell itself for collar cells.
Region region_of(const WhitneyBox& w, int n) {
  Region r;
  double s = w.length();
  for (int i = 0; i < n; ++i) {
    double lo = static_cast<double>(w.idx[i]) * s, hi = static_cast<double>(w.idx[i] + 1) * s;
    r.lo[i] = {lo, w.collar ? 0.0 : -0.5 * s};
    r.hi[i] = {hi, w.collar ? 0.0 : 0.5 * s};
  }
  return r;
}

struct Rect {
  std::array<XCoord, kMaxDim> lo{}, hi{};
};

// Removes the open box S from R on the axes in `axes`.
void subtract(const Rect& R, const Region& S, const std::vector<int>& axes, double theta, std::vector<Rect>& out) {
  for (int a : axes)
    if (cmp(S.lo[a], R.hi[a], theta) >= 0 || cmp(R.lo[a], S.hi[a], theta) >= 0) {
      out.push_back(R);
      return;
    }
  Rect cur = R;
  for (int a : axes) {
    if (cmp(S.lo[a], cur.lo[a], theta) > 0) {
      Rect piece = cur;
      piece.hi[a] = S.lo[a];
      out.push_back(piece);
      cur.lo[a] = S.lo[a];
    }
    if (cmp(S.hi[a], cur.hi[a], theta) < 0) {
      Rect piece = cur;
      piece.lo[a] = S.hi[a];
      out.push_back(piece);
      cur.hi[a] = S.hi[a];
    }
  }
}

Point halton_in_ball(std::uint64_t i, const Point& c, double r, int n, bool& ok) {
  static const int primes[kMaxDim] = {2, 3, 5, 7};
  Point X = c;
  double s = 0.0;
  for (int j = 0; j < n; ++j) {
    double u = 2.0 * radical_inverse(i, primes[j]) - 1.0;
    X[j] += r * u;
    s += u * u;
  }
  ok = s < 1.0;
  return X;
}

double window_distance(const Box& w, const Point& X) {
  double m = kInf;
  for (int i = 0; i < w.n; ++i) m = std::min({m, X[i] - w.lo[i], w.hi[i] - X[i]});
  return m;
}

}  // namespace

// ------------------------------------------------------------------ constants

Json RegionConstants::to_json() const {
  Json j;
  j["a0"] = tagged(a0, Tag::Fitted);
  j["A0"] = tagged(A0, Tag::Fitted);
  j["C_d"] = tagged(cd, Tag::Fitted);
  j["c_K"] = tagged(ck, Tag::Formula);
  j["c"] = tagged(c, Tag::Measured);
  j["eta"] = tagged(eta, Tag::Formula);
  j["K"] = tagged(K, Tag::Formula);
  j["theta"] = tagged(theta, Tag::Formula);
  j["a2"] = tagged(a2, Tag::Formula);
  j["A2"] = tagged(A2, Tag::Formula);
  j["a2_realized"] = tagged(a2_realized, Tag::Measured);
  j["A2_realized"] = tagged(A2_realized, Tag::Measured);
  j["N0"] = tagged(N0, Tag::Formula);
  j["c_center"] = tagged(c_center, Tag::Formula);
  j["c1"] = tagged(c1, Tag::Formula);
  j["c11"] = tagged(c11, Tag::Formula);
  j["c12"] = tagged(c12, Tag::Formula);
  j["c13"] = tagged(c13, Tag::Formula);
  j["c14"] = tagged(c14, Tag::Formula);
  j["c_simultaneous"] = tagged(c_simultaneous, Tag::Formula);
  j["M0"] = tagged(M0, Tag::Formula);
  return j;
}

// ------------------------------------------------------------------ regions

std::shared_ptr<const RegionSets> RegionSets::build(std::shared_ptr<const DyadicTree> tree,
                                                    std::shared_ptr<const WhitneyGrid> grid,
                                                    const SawtoothParams& params) {
  auto R = std::make_shared<RegionSets>();
  R->tree_ = tree;
  R->grid_ = grid;
  const DyadicTree& t = *tree;
  const Boundary& g = t.boundary();
  const int n = grid->n();
  const double sn = sqrt_n(n);
  RegionConstants& k = R->k_;
  k.n = n;
  k.d = g.d();
  k.theta = grid->theta();

  GridReport gr = verify_grid(t, params.a0, params.A0);
  k.a0 = gr.a0;
  k.A0 = gr.A0;
  k.cd = gr.cd;
  k.ck = gr.ck;

  // Corkscrew constant of Omega for the surface balls Delta(x_Q, a0 l(Q) / 2).
  std::vector<int> canon = t.canonical_cubes();
  int samples = std::min<int>(params.corkscrew_samples, static_cast<int>(canon.size()));
  std::vector<double> cs(samples, 1.0);
  parallel_for(samples, [&](std::size_t i) {
    const Cube& q = t.cube(canon[(i * canon.size()) / samples]);
    Point x = q.center_atom >= 0 ? t.atom(q.center_atom) : q.center;
    cs[i] = corkscrew_point(g, x, 0.5 * k.a0 * q.length()).c;
  });
  k.c = samples > 0 ? *std::min_element(cs.begin(), cs.end()) : 0.5;

  k.eta = params.eta > 0 ? params.eta : 0.5 * k.ck;
  k.K = params.K > 0 ? params.K : 500.0 * k.A0 / k.a0;
  if (params.enforce) {
    if (!(k.eta < k.ck)) throw ConfigError("sawtooth.eta must be below c_K");
    if (k.K < 500.0 * k.A0 / k.a0 * (1 - 1e-12)) throw ConfigError("sawtooth.K must be at least 500 A0 / a0");
  } else {
    R->notes_.push_back("parameter constraints on eta and K not enforced");
  }
  k.a2 = k.a0 * k.c * k.eta / (82.0 * sn);
  k.A2 = k.a0 * k.K / (4.0 * sn);
  k.a2_realized = k.a2;
  k.A2_realized = k.A2;
  k.N0 = std::pow((5.0 * sn * k.A2 + k.A0) / k.a2, n) * unit_ball(n);
  k.c_center = k.c / (1000.0 * sn);
  k.c11 = k.c_center * k.ck * k.a0 / (4.0 * k.A0);
  k.c12 = 1.0 / (8.0 * n);
  k.c13 = k.a2 / (4000.0 * sn * k.A2);
  k.c14 = k.c_center * k.a0 / (20.0 * sn * k.A2);
  k.c1 = std::min({k.c11, k.c12, k.c13, k.c14});
  k.c_simultaneous = k.a2 / (12.0 * sn * k.A2);
  k.M0 = 125.0 * k.A0 * k.A0 / (k.ck * k.ck);

  R->by_level_.assign(grid->k_leaf() - grid->k_top() + 1, {});
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const auto& w = grid->at(i);
    if (!w.collar) R->by_level_[w.k - grid->k_top()].push_back(i);
  }
  std::vector<Point> pts(t.atom_count());
  for (int a = 0; a < t.atom_count(); ++a) pts[a] = t.atom(a);
  R->atoms_kd_ = KdTree(pts, n);
  R->anchor_.resize(t.cubes().size());
  R->radius_.assign(t.cubes().size(), 0.0);
  parallel_for(t.cubes().size(), [&](std::size_t q) {
    const Cube& c = t.cube(static_cast<int>(q));
    Point x = c.center_atom >= 0 ? t.atom(c.center_atom) : c.center;
    double rq = 0.0;
    for (int a = c.begin; a < c.end; ++a) rq = std::max(rq, dist(t.atom(a), x, n));
    R->anchor_[q] = x;
    R->radius_[q] = rq;
  });
  return R;
}

double RegionSets::box_cube_distance(std::size_t box, int q, double cap) const {
  const DyadicTree& t = *tree_;
  const Cube& c = t.cube(q);
  Box b = grid_->at(box).box(grid_->n());
  double best = kInf;
  if (c.size() <= 256) {
    for (int a = c.begin; a < c.end; ++a) best = std::min(best, b.distance_to(t.atom(a)));
  } else {
    for (int a : atoms_kd_.within(b.center(), cap + 0.5 * b.diam() + 1e-300))
      if (a >= c.begin && a < c.end) best = std::min(best, b.distance_to(t.atom(a)));
  }
  return best <= cap ? best : kInf;
}

bool RegionSets::box_near_cube(std::size_t box, int q, double cap) const {
  double dx = grid_->at(box).box(grid_->n()).distance_to(anchor_[q]);
  if (dx + radius_[q] <= cap) return true;
  if (dx - radius_[q] > cap) return false;
  return box_cube_distance(box, q, cap) < kInf;
}

std::pair<int, int> RegionSets::w0_levels(int q) const {
  const double sn = sqrt_n(k_.n);
  double l = tree_->cube(q).length();
  double smin = k_.a0 * k_.c * k_.eta * l / (82.0 * sn);
  double smax = k_.a0 * k_.K * l / (4.0 * sn);
  int lo = static_cast<int>(std::ceil(-std::log2(smax) - 1e-9));
  int hi = static_cast<int>(std::floor(-std::log2(smin) + 1e-9));
  return {std::max(lo, grid_->k_top()), std::min(hi, grid_->k_leaf())};
}

std::vector<std::size_t> RegionSets::candidates(int q, int k_lo, int k_hi, double reach) const {
  const int n = grid_->n();
  const Point& x = anchor_[q];
  const double rq = radius_[q];
  std::vector<std::size_t> out;
  for (int k = std::max(k_lo, grid_->k_top()); k <= std::min(k_hi, grid_->k_leaf()); ++k)
    for (std::size_t id : by_level_[k - grid_->k_top()]) {
      Box b = grid_->at(id).box(n);
      if (b.distance_to(x) <= reach + rq) out.push_back(id);
    }
  return out;
}

bool RegionSets::in_cs(int q, std::size_t box) const {
  const auto& w = grid_->at(box);
  if (w.collar) return false;
  const double sn = sqrt_n(k_.n);
  double l = tree_->cube(q).length(), s = w.length();
  if (s < k_.a0 * k_.c * l / (82.0 * sn) || s > k_.a0 * l / (8.0 * sn)) return false;
  return box_near_cube(box, q, 0.5 * k_.a0 * l);
}

bool RegionSets::in_w0(int q, std::size_t box) const {
  const auto& w = grid_->at(box);
  if (w.collar) return false;
  const double sn = sqrt_n(k_.n);
  double l = tree_->cube(q).length(), s = w.length();
  if (s < k_.a0 * k_.c * k_.eta * l / (82.0 * sn) || s > k_.a0 * k_.K * l / (4.0 * sn)) return false;
  return box_near_cube(box, q, k_.a0 * k_.K * l);
}

std::vector<std::size_t> RegionSets::list_cs(int q) const {
  const double sn = sqrt_n(k_.n);
  double l = tree_->cube(q).length();
  int lo = static_cast<int>(std::floor(-std::log2(k_.a0 * l / (8.0 * sn))));
  int hi = static_cast<int>(std::ceil(-std::log2(k_.a0 * k_.c * l / (82.0 * sn))));
  std::vector<std::size_t> out;
  for (std::size_t id : candidates(q, lo, hi, 0.5 * k_.a0 * l))
    if (in_cs(q, id)) out.push_back(id);
  return out;
}

std::vector<std::size_t> RegionSets::list_w0(int q) const {
  auto [lo, hi] = w0_levels(q);
  double l = tree_->cube(q).length();
  std::vector<std::size_t> out;
  for (std::size_t id : candidates(q, lo - 1, hi + 1, k_.a0 * k_.K * l))
    if (in_w0(q, id)) out.push_back(id);
  return out;
}

long RegionSets::corkscrew_box(int q) const {
  long best = -1;
  double bd = -1.0;
  for (std::size_t id : list_cs(q)) {
    double d = grid_->at(id).dist + 0.5 * grid_->at(id).length();
    if (d > bd) {
      bd = d;
      best = static_cast<long>(id);
    }
  }
  return best;
}

std::vector<std::size_t> RegionSets::boxes_meeting_ball(const Point& c, double r) const {
  const WhitneyGrid& G = *grid_;
  const int n = G.n();
  const double sn = sqrt_n(n);
  double dc = G.boundary()->distance(c);
  int k_lo = G.k_top(), k_hi = G.k_leaf();
  k_lo = std::max(k_lo, static_cast<int>(std::floor(-std::log2((dc + r) / (4.0 * sn)))) - 1);
  if (dc > r) k_hi = std::min(k_hi, static_cast<int>(std::ceil(-std::log2((dc - r) / (41.0 * sn)))) + 1);
  std::vector<std::size_t> out;
  for (int k = k_lo; k <= k_hi; ++k) {
    Index lo{}, hi{};
    double count = 1.0;
    for (int i = 0; i < n; ++i) {
      lo[i] = static_cast<std::int64_t>(std::floor(std::ldexp(std::max(c[i] - r, G.window().lo[i]), k)));
      hi[i] = static_cast<std::int64_t>(std::floor(std::ldexp(std::min(c[i] + r, G.window().hi[i]), k)));
      if (hi[i] < lo[i]) count = 0.0;
      count *= static_cast<double>(hi[i] - lo[i] + 1);
    }
    if (count <= 0.0 || count > 2e5) continue;
    Index cur = lo;
    while (true) {
      long id = G.find(k, cur);
      if (id >= 0 && G.at(id).box(n).distance_to(c) <= r) out.push_back(static_cast<std::size_t>(id));
      int i = 0;
      for (; i < n; ++i) {
        if (++cur[i] <= hi[i]) break;
        cur[i] = lo[i];
      }
      if (i == n) break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> RegionSets::list_w(int q) const {
  std::vector<std::size_t> w0 = list_w0(q);
  std::vector<std::size_t> out = w0;
  long cb = corkscrew_box(q);
  const Boundary& g = *grid_->boundary();
  const int n = grid_->n();
  if (cb >= 0 && g.d() < n - 1) {
    const double sn = sqrt_n(n);
    const double l = tree_->cube(q).length();
    const double leaf = std::ldexp(1.0, -grid_->k_leaf());
    Point XQ = grid_->at(cb).box(n).center();
    double dQ = box_cube_distance(static_cast<std::size_t>(cb), q, kInf);
    for (std::size_t id : w0) {
      Point XI = grid_->at(id).box(n).center();
      double s = std::min(g.distance(XQ), g.distance(XI));
      double L = dist(XQ, XI, n);
      if (L == 0.0 || s <= 0.0) continue;
      // Chain balls stay within L + s of both endpoints with radius at most delta / 2; when every box such a
      // ball can meet already satisfies the W_Q^0 bounds, the chain adds nothing.
      double dmax = std::max(g.distance(XQ), g.distance(XI)) + 0.5 * L + s;
      double far = dQ + grid_->at(cb).box(n).diam() + L + s + 0.5 * dmax;
      if (k_.a2 * l <= leaf && 1.5 * dmax / (4.0 * sn) <= k_.A2 * l && far <= k_.a0 * k_.K * l) continue;
      HarnackChain hc = harnack_chain(g, XQ, XI, s, std::max(1.0, L / s) * (1 + 1e-9));
      for (const Ball& b : hc.balls)
        for (std::size_t j : boxes_meeting_ball(b.center, b.radius))
          if (!grid_->at(j).collar) out.push_back(j);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ------------------------------------------------------------------ domain

Box Face::box(int n, double theta) const {
  Box b;
  b.n = n;
  for (int i = 0; i < n; ++i) {
    if (i == axis) {
      b.lo[i] = b.hi[i] = value(c, theta);
    } else {
      b.lo[i] = value(lo[i], theta);
      b.hi[i] = value(hi[i], theta);
    }
  }
  return b;
}

SawtoothDomain SawtoothDomain::build(std::shared_ptr<const RegionSets> regions, const Family& family, int q0) {
  SawtoothDomain D;
  D.R_ = regions;
  D.F_ = family;
  D.q0_ = q0;
  const RegionSets& R = *regions;
  const DyadicTree& t = R.tree();
  const WhitneyGrid& G = R.grid();
  const RegionConstants& k = R.constants();
  const int n = G.n();
  const double sn = sqrt_n(n);
  const double theta = G.theta();
  const auto& stop = family.stop_generation();
  int qb = 0, qe = t.atom_count();
  if (q0 >= 0) {
    qb = t.cube(q0).begin;
    qe = t.cube(q0).end;
  }
  auto in_scope = [&](int a) { return a >= qb && a < qe; };

  // Atoms of the cubes of D_F (or D_{F,Q0}) first appearing at each generation.
  const int nk = t.k_max() - t.k_min() + 1;
  std::vector<KdTree> gen_kd(nk);
  for (int gi = 0; gi < nk; ++gi) {
    int kk = t.k_min() + gi;
    std::vector<Point> pts;
    for (int q : t.generation(kk)) {
      const Cube& c = t.cube(q);
      if (c.born != kk || c.begin < qb || c.end > qe) continue;
      if (!family.in_sawtooth(t, q)) continue;
      for (int a = c.begin; a < c.end; ++a) pts.push_back(t.atom(a));
    }
    gen_kd[gi] = KdTree(pts, n);
  }

  const std::size_t N = G.size();
  D.in_.assign(N, 0);
  parallel_for(N, [&](std::size_t id) {
    const WhitneyBox& w = G.at(id);
    Box b = w.box(n);
    if (w.collar) {
      int a = t.nearest_atom(b.center());
      D.in_[id] = (in_scope(a) && stop[a] >= kNoStop) ? 1 : 0;
      return;
    }
    double s = w.length(), half = 0.5 * b.diam();
    Point c = b.center();
    for (int gi = 0; gi < nk; ++gi) {
      if (gen_kd[gi].size() == 0) continue;
      double l = std::ldexp(1.0, -(t.k_min() + gi));
      if (s < k.a0 * k.c * k.eta * l / (82.0 * sn) || s > k.a0 * k.K * l / (4.0 * sn)) continue;
      double reach = k.a0 * k.K * l;
      auto [idx, dc] = gen_kd[gi].nearest(c);
      if (dc <= reach) {
        D.in_[id] = 1;
        return;
      }
      if (dc - half > reach) continue;
      for (int j : gen_kd[gi].within(c, reach + half))
        if (b.distance_to(gen_kd[gi].point(j)) <= reach) {
          D.in_[id] = 1;
          return;
        }
    }
  });

  for (std::size_t id = 0; id < N; ++id) {
    bool col = G.at(id).collar;
    if (D.in_[id]) {
      col ? ++D.stats_.collar_in : ++D.stats_.in_boxes;
    } else {
      col ? ++D.stats_.collar_out : ++D.stats_.out_boxes;
    }
  }

  // Boundary faces of the union of stars and collar-in cells.
  const Box& win = G.window();
  std::vector<std::vector<Face>> parts(N);
  parallel_for(N, [&](std::size_t id) {
    if (!D.in_[id]) return;
    const WhitneyBox& w = G.at(id);
    Region E = region_of(w, n);
    std::vector<std::size_t> nb = G.touching(id);
    std::vector<Region> cover;
    for (std::size_t j : nb)
      if (D.in_[j]) cover.push_back(region_of(G.at(j), n));
    for (int ax = 0; ax < n; ++ax) {
      std::vector<int> others;
      for (int i = 0; i < n; ++i)
        if (i != ax) others.push_back(i);
      for (int side = -1; side <= 1; side += 2) {
        XCoord c = side > 0 ? E.hi[ax] : E.lo[ax];
        if (cmp(c, {win.lo[ax], 0.0}, theta) <= 0 || cmp(c, {win.hi[ax], 0.0}, theta) >= 0) continue;
        Rect r0;
        bool empty = false;
        for (int i : others) {
          r0.lo[i] = cmp(E.lo[i], {win.lo[i], 0.0}, theta) < 0 ? XCoord{win.lo[i], 0.0} : E.lo[i];
          r0.hi[i] = cmp(E.hi[i], {win.hi[i], 0.0}, theta) > 0 ? XCoord{win.hi[i], 0.0} : E.hi[i];
          if (cmp(r0.lo[i], r0.hi[i], theta) >= 0) empty = true;
        }
        if (empty) continue;
        std::vector<Rect> rects{r0}, next;
        for (const Region& S : cover) {
          bool covers = side > 0 ? (cmp(S.lo[ax], c, theta) <= 0 && cmp(c, S.hi[ax], theta) < 0)
                                 : (cmp(S.lo[ax], c, theta) < 0 && cmp(c, S.hi[ax], theta) <= 0);
          if (!covers) continue;
          next.clear();
          for (const Rect& r : rects) subtract(r, S, others, theta, next);
          rects.swap(next);
          if (rects.empty()) break;
        }
        for (const Rect& r : rects) {
          Face f;
          f.axis = ax;
          f.side = side;
          f.c = c;
          f.lo = r.lo;
          f.hi = r.hi;
          f.owner = static_cast<long>(id);
          f.proxy = w.collar;
          parts[id].push_back(f);
        }
      }
    }
  });
  for (auto& p : parts)
    for (auto& f : p) D.faces_.push_back(f);

  std::vector<Point> centers, sig_centers;
  D.stats_.min_face_ratio = kInf;
  for (const Face& f : D.faces_) {
    Box b = f.box(n, theta);
    double half = 0.5 * b.diam();
    centers.push_back(b.center());
    D.face_reach_ = std::max(D.face_reach_, half);
    if (f.proxy) {
      ++D.stats_.proxy_faces;
      continue;
    }
    ++D.stats_.sigma_faces;
    D.sigma_.push_back(f);
    sig_centers.push_back(b.center());
    D.sigma_reach_ = std::max(D.sigma_reach_, half);
    double l = G.at(f.owner).length();
    for (int i = 0; i < n; ++i)
      if (i != f.axis) D.stats_.min_face_ratio = std::min(D.stats_.min_face_ratio, b.side(i) / (theta * l));
  }
  if (D.stats_.sigma_faces == 0) D.stats_.min_face_ratio = 0.0;
  D.face_kd_ = KdTree(centers, n);
  D.sigma_kd_ = KdTree(sig_centers, n);

  // Atoms of Gamma ∩ boundary: atoms lying in a cell of the domain.
  D.gamma_mark_.assign(t.atom_count(), 0);
  std::vector<Point> gp;
  for (int a = 0; a < t.atom_count(); ++a) {
    long id = G.box_containing(t.atom(a));
    if (id >= 0 && D.in_[id]) {
      D.gamma_mark_[a] = 1;
      D.gamma_atoms_.push_back(a);
      gp.push_back(t.atom(a));
    }
  }
  D.gamma_kd_ = KdTree(gp, n);
  return D;
}

bool SawtoothDomain::contains(const Point& X) const {
  const WhitneyGrid& G = R_->grid();
  long id = G.box_containing(X);
  if (id < 0) return false;
  if (in_[id]) return true;
  const int n = G.n();
  for (std::size_t j : G.touching(static_cast<std::size_t>(id))) {
    if (!in_[j] || G.at(j).collar) continue;
    Box s = G.star(j);
    bool inside = true;
    for (int i = 0; i < n && inside; ++i) inside = X[i] > s.lo[i] && X[i] < s.hi[i];
    if (inside) return true;
  }
  return false;
}

double SawtoothDomain::face_distance(const Point& X) const {
  if (faces_.empty()) return kInf;
  const int n = this->n();
  const double theta = R_->grid().theta();
  auto [i0, d0] = face_kd_.nearest(X);
  double best = faces_[i0].box(n, theta).distance_to(X);
  for (int j : face_kd_.within(X, best + face_reach_ + 1e-300))
    best = std::min(best, faces_[j].box(n, theta).distance_to(X));
  (void)d0;
  return best;
}

double SawtoothDomain::boundary_distance(const Point& X) const {
  const WhitneyGrid& G = R_->grid();
  return std::min({G.boundary()->distance(X), face_distance(X), window_distance(G.window(), X)});
}

double SawtoothDomain::star_gamma(const Point& x, double r) const {
  if (gamma_atoms_.empty()) return 0.0;
  const DyadicTree& t = R_->tree();
  long double s = 0.0L;
  for (int j : gamma_kd_.within(x, r)) s += t.atom_mass(gamma_atoms_[j]);
  return static_cast<double>(s);
}

double SawtoothDomain::face_integral(const Face& f, const Point& x, double r) const {
  const int n = this->n();
  const double theta = R_->grid().theta();
  const Boundary& g = *R_->grid().boundary();
  Box b = f.box(n, theta);
  double h = x[f.axis] - b.lo[f.axis];
  double rho2 = r * r - h * h;
  if (rho2 <= 0.0) return 0.0;
  std::vector<int> others;
  for (int i = 0; i < n; ++i)
    if (i != f.axis) others.push_back(i);
  using GL = boost::math::quadrature::gauss<double, 10>;
  Point P{};
  P[f.axis] = b.lo[f.axis];
  std::function<double(std::size_t, double)> rec = [&](std::size_t j, double rem2) -> double {
    if (j == others.size()) return g.weight(P);
    int u = others[j];
    double half = std::sqrt(std::max(rem2, 0.0));
    double lo = std::max(b.lo[u], x[u] - half), hi = std::min(b.hi[u], x[u] + half);
    if (!(lo < hi)) return 0.0;
    int panels = 2;
    double total = 0.0, w = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      double a0 = lo + p * w;
      total += GL::integrate(
          [&](double tt) {
            Point saved = P;
            P[u] = tt;
            double v = rec(j + 1, rem2 - (tt - x[u]) * (tt - x[u]));
            P = saved;
            return v;
          },
          a0, a0 + w);
    }
    return total;
  };
  return rec(0, rho2);
}

double SawtoothDomain::star_sigma(const Point& x, double r) const {
  if (sigma_.empty()) return 0.0;
  long double s = 0.0L;
  for (int j : sigma_kd_.within(x, r + sigma_reach_ + 1e-300)) s += face_integral(sigma_[j], x, r);
  return static_cast<double>(s);
}

double SawtoothDomain::m_ball(const Point& X, double r, int samples) const {
  const int n = this->n();
  const Boundary& g = *R_->grid().boundary();
  long double acc = 0.0L;
  int got = 0;
  for (std::uint64_t i = 1; got < samples && i < static_cast<std::uint64_t>(samples) * 64; ++i) {
    bool ok = false;
    Point Y = halton_in_ball(i, X, r, n, ok);
    if (!ok) continue;
    ++got;
    if (contains(Y)) acc += g.weight(Y);
  }
  if (got == 0) return 0.0;
  return static_cast<double>(acc / got) * unit_ball(n) * std::pow(r, n);
}

Point SawtoothDomain::sample_boundary(std::mt19937_64& rng, bool sigma) const {
  const int n = this->n();
  const double theta = R_->grid().theta();
  if (sigma && !sigma_.empty()) {
    const Face& f = sigma_[static_cast<std::size_t>(uniform01(rng) * sigma_.size()) % sigma_.size()];
    Box b = f.box(n, theta);
    Point x{};
    for (int i = 0; i < n; ++i) x[i] = uniform(rng, b.lo[i], b.hi[i]);
    x[f.axis] = b.lo[f.axis];
    return x;
  }
  if (gamma_atoms_.empty()) throw VerificationError("sawtooth domain has an empty boundary sample");
  int a = gamma_atoms_[static_cast<std::size_t>(uniform01(rng) * gamma_atoms_.size()) % gamma_atoms_.size()];
  return R_->tree().atom(a);
}

// ------------------------------------------------------------------ axioms

namespace {

struct Search {
  Point X{};
  double phi = -1.0;
};

// Corkscrew search inside dom ∩ B(x, r).
Search corkscrew_in(const SawtoothDomain& dom, const Point& x, double r) {
  const int n = dom.n();
  auto score = [&](const Point& X) {
    double rem = r - dist(X, x, n);
    if (rem <= 0.0 || !dom.contains(X)) return -1.0;
    return std::min(rem, dom.boundary_distance(X));
  };
  std::vector<Search> top;
  for (std::uint64_t i = 1; i <= 384; ++i) {
    bool ok = false;
    Point X = halton_in_ball(i, x, r, n, ok);
    if (!ok) continue;
    double v = score(X);
    if (v > 0) top.push_back({X, v});
  }
  std::sort(top.begin(), top.end(), [](const Search& a, const Search& b) { return a.phi > b.phi; });
  if (top.size() > 4) top.resize(4);
  Search best;
  for (Search s : top) {
    for (double step = 0.5 * s.phi; step > r * 1e-3; step *= 0.5) {
      bool moved = true;
      while (moved) {
        moved = false;
        for (int j = 0; j < n; ++j)
          for (int sg = -1; sg <= 1; sg += 2) {
            Point Y = s.X;
            Y[j] += sg * step;
            double v = score(Y);
            if (v > s.phi) {
              s = {Y, v};
              moved = true;
            }
          }
      }
    }
    if (s.phi > best.phi) best = s;
  }
  return best;
}

double log_uniform(std::mt19937_64& rng, double a, double b) {
  return std::exp(uniform(rng, std::log(a), std::log(b)));
}

// Counts chain points Z_i along the cell path, with |Z_i - Z_{i+1}| < delta*(Z_i)/2; -1 when no chain exists.
int chain_points(const SawtoothDomain& dom, const Point& X1, const Point& X2, double radius) {
  const WhitneyGrid& G = dom.regions().grid();
  const int n = dom.n();
  long s = G.box_containing(X1), e = G.box_containing(X2);
  if (s < 0 || e < 0) return -1;
  std::unordered_map<std::size_t, double> best;
  std::unordered_map<std::size_t, std::size_t> prev;
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  best[s] = 0.0;
  pq.push({0.0, static_cast<std::size_t>(s)});
  auto center = [&](std::size_t id) { return G.at(id).box(n).center(); };
  auto bd = [&](std::size_t id) { return std::max(dom.boundary_distance(center(id)), 1e-300); };
  int expansions = 0;
  while (!pq.empty() && expansions < 200000) {
    auto [dv, u] = pq.top();
    pq.pop();
    if (dv > best[u]) continue;
    if (u == static_cast<std::size_t>(e)) break;
    ++expansions;
    Point cu = center(u);
    double bu = bd(u);
    for (std::size_t v : G.touching(u)) {
      if (!dom.cell_in(v)) continue;
      Point cv = center(v);
      if (dist(cv, X1, n) > radius) continue;
      double w = 1.0 + 4.0 * dist(cu, cv, n) / std::min(bu, bd(v));
      auto it = best.find(v);
      if (it == best.end() || dv + w < it->second) {
        best[v] = dv + w;
        prev[v] = u;
        pq.push({dv + w, v});
      }
    }
  }
  if (!best.count(e)) return -1;
  std::vector<Point> path{X2};
  for (std::size_t v = e; v != static_cast<std::size_t>(s); v = prev[v]) path.push_back(center(v));
  path.push_back(center(s));
  path.push_back(X1);
  std::reverse(path.begin(), path.end());
  int count = 1;
  Point Z = path[0];
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Point& T = path[i];
    while (true) {
      if (!dom.contains(Z)) return -1;
      double ds = dom.boundary_distance(Z);
      if (!(ds > 0.0)) return -1;
      double step = 0.45 * ds;
      double L = dist(Z, T, n);
      if (L < step) {
        if (i + 1 == path.size() && L > 0.0) {
          Z = T;
          ++count;
        }
        break;
      }
      Z = Z + (step / L) * (T - Z);
      ++count;
      if (count > 100000) return -1;
    }
  }
  return count;
}

}  // namespace

Json AxiomReport::to_json() const {
  Json j;
  j["H1"] = {{"samples", h1_samples},
             {"min_achieved_c", tagged(h1_min_c, Tag::Measured)},
             {"c1", tagged(c1, Tag::Formula)},
             {"ok", h1_ok},
             {"witness", h1_witness}};
  j["H2"] = {{"pairs", h2_pairs}, {"found", h2_found}, {"max_points", h2_max_points}, {"ok", h2_ok}};
  j["H3"] = {{"C3", tagged(C3, Tag::Fitted)}, {"per_scale", C3_per_scale}, {"ok", h3_ok}};
  j["sigma_star_bounds"] = {{"V1", tagged(V1, Tag::Fitted)},
                            {"v2", tagged(v2, Tag::Fitted)},
                            {"samples", band_samples},
                            {"ok", band_ok}};
  j["H4"] = {{"C4", tagged(C4, Tag::Fitted)}, {"ok", h4_ok}};
  j["H5"] = {{"V5", tagged(V5, Tag::Fitted)}, {"per_scale", V5_per_scale}, {"ok", h5_ok}};
  j["H6"] = "not numerically testable; holds by construction";
  j["ok"] = ok();
  return j;
}

AxiomReport verify_axioms(const SawtoothDomain& dom, const AxiomPlan& plan) {
  AxiomReport rep;
  const RegionSets& R = dom.regions();
  const RegionConstants& K = R.constants();
  const Boundary& g = *R.grid().boundary();
  const int n = dom.n();
  const double d = K.d;
  double leaf = std::ldexp(1.0, -R.grid().k_leaf());
  double r_min = plan.r_min > 0 ? plan.r_min : 64.0 * leaf;
  double r_max = plan.r_max > 0 ? plan.r_max : 0.25 * std::ldexp(1.0, -R.tree().k_min());
  if (r_min >= r_max) r_min = r_max / 8.0;
  rep.c1 = K.c1;

  // H1
  {
    std::mt19937_64 rng(plan.seed);
    std::vector<std::pair<Point, double>> pts(plan.h1_samples);
    for (int i = 0; i < plan.h1_samples; ++i) pts[i] = {dom.sample_boundary(rng, i % 2 == 1), log_uniform(rng, r_min, r_max)};
    std::vector<Search> found(plan.h1_samples);
    parallel_for(pts.size(), [&](std::size_t i) { found[i] = corkscrew_in(dom, pts[i].first, pts[i].second); });
    rep.h1_samples = plan.h1_samples;
    rep.h1_min_c = kInf;
    for (int i = 0; i < plan.h1_samples; ++i) {
      double c = std::max(found[i].phi, 0.0) / pts[i].second;
      if (c < rep.h1_min_c) {
        rep.h1_min_c = c;
        rep.h1_witness = {{"x", std::vector<double>(pts[i].first.begin(), pts[i].first.begin() + n)},
                          {"r", pts[i].second},
                          {"achieved_c", c}};
      }
    }
    rep.h1_ok = rep.h1_min_c >= K.c1;
  }

  // H2: pairs of corkscrew points at a common scale.
  {
    std::mt19937_64 rng(plan.seed + 1);
    std::vector<int> counts(plan.h2_pairs, -1);
    parallel_for(plan.h2_pairs, [&](std::size_t i) {
      std::mt19937_64 local(plan.seed * 7919 + i);
      double r = log_uniform(local, r_min, r_max);
      Point x1 = dom.sample_boundary(local, false);
      Point x2 = dom.sample_boundary(local, i % 2 == 1);
      Search s1 = corkscrew_in(dom, x1, r), s2 = corkscrew_in(dom, x2, r);
      if (s1.phi <= 0 || s2.phi <= 0) return;
      counts[i] = chain_points(dom, s1.X, s2.X, 3.0 * dist(s1.X, s2.X, n) + r);
    });
    (void)rng;
    rep.h2_pairs = plan.h2_pairs;
    for (int c : counts)
      if (c > 0) {
        ++rep.h2_found;
        rep.h2_max_points = std::max(rep.h2_max_points, c);
      }
    rep.h2_ok = rep.h2_found == rep.h2_pairs;
  }

  // H3 and the two-sided bounds of sigma*.
  {
    std::mt19937_64 rng(plan.seed + 2);
    int m = plan.h3_centers;
    std::vector<Point> xs(m);
    for (int i = 0; i < m; ++i) xs[i] = dom.sample_boundary(rng, i % 2 == 1);
    int S = plan.h3_scales;
    std::vector<double> ratio(static_cast<std::size_t>(m) * S, 0.0), band(static_cast<std::size_t>(m) * S, -1.0);
    parallel_for(static_cast<std::size_t>(m) * S, [&](std::size_t t) {
      int i = static_cast<int>(t / S), s = static_cast<int>(t % S);
      double r = r_max * std::ldexp(1.0, -2 * s - 1);
      if (r < r_min / 4) r = r_min / 4;
      double a = dom.star_ball(xs[i], r), b = dom.star_ball(xs[i], 2 * r);
      ratio[t] = a > 0 ? b / a : kInf;
      if (g.distance(xs[i]) < r / K.M0 && !g.ball_truncated(xs[i], r)) band[t] = a / std::pow(r, d);
    });
    rep.C3_per_scale.assign(S, 0.0);
    for (std::size_t t = 0; t < ratio.size(); ++t) {
      rep.C3_per_scale[t % S] = std::max(rep.C3_per_scale[t % S], ratio[t]);
      rep.C3 = std::max(rep.C3, ratio[t]);
    }
    rep.h3_ok = std::isfinite(rep.C3);
    rep.v2 = kInf;
    for (double b : band)
      if (b >= 0) {
        ++rep.band_samples;
        rep.V1 = std::max(rep.V1, b);
        rep.v2 = std::min(rep.v2, b);
      }
    rep.band_ok = rep.band_samples > 0 && rep.v2 > 0 && std::isfinite(rep.V1);
  }

  // H4 and H5 through m(B ∩ Omega_F).
  {
    std::mt19937_64 rng(plan.seed + 3);
    int m = plan.h5_centers;
    std::vector<Point> xs(m);
    for (int i = 0; i < m; ++i) xs[i] = dom.sample_boundary(rng, i % 2 == 1);
    const int S = 4;
    std::vector<double> mb(static_cast<std::size_t>(m) * S), sb(static_cast<std::size_t>(m) * S);
    parallel_for(static_cast<std::size_t>(m) * S, [&](std::size_t t) {
      int i = static_cast<int>(t / S), s = static_cast<int>(t % S);
      double r = std::max(r_max * std::ldexp(1.0, -s - 1), r_min / 4);
      mb[t] = dom.m_ball(xs[i], r, plan.m_samples);
      sb[t] = dom.star_ball(xs[i], r);
    });
    rep.V5_per_scale.assign(S - 1, 0.0);
    for (int i = 0; i < m; ++i)
      for (int s = 0; s + 1 < S; ++s) {
        double big = mb[i * S + s], small = mb[i * S + s + 1];
        rep.C4 = std::max(rep.C4, small > 0 ? big / small : kInf);
        double r = std::max(r_max * std::ldexp(1.0, -s - 1), r_min / 4);
        double rs = std::max(r_max * std::ldexp(1.0, -s - 2), r_min / 4);
        double rho_r = big / (r * sb[i * S + s]), rho_s = small / (rs * sb[i * S + s + 1]);
        double v = (rho_s > 0 ? rho_r / rho_s : kInf) / (r / rs);
        rep.V5_per_scale[s] = std::max(rep.V5_per_scale[s], v);
        rep.V5 = std::max(rep.V5, v);
      }
    rep.h4_ok = std::isfinite(rep.C4) && rep.C4 > 0;
    rep.h5_ok = std::isfinite(rep.V5) && rep.V5 > 0;
  }
  return rep;
}

// ------------------------------------------------------------------ structural properties

bool StructuralReport::ok() const {
  return cs_found == cs_cubes && hidden_violations == 0 && chain_violations == 0 && face_violations == 0 &&
         consistency_violations == 0 && local_ball_violations == 0 && lifted_found == lifted;
}

Json StructuralReport::to_json() const {
  Json j;
  j["simultaneous_corkscrews"] = {{"cubes", cs_cubes},
                                  {"found", cs_found},
                                  {"min_radius_over_rQ", tagged(cs_min_ratio, Tag::Measured)}};
  j["lifted_cubes"] = {{"cubes", lifted},
                       {"found", lifted_found},
                       {"l(P)/l(Q)", {tagged(lift_lo[0], Tag::Measured), tagged(lift_hi[0], Tag::Measured)}},
                       {"dist(P,Q)/l(Q)", {tagged(lift_lo[1], Tag::Measured), tagged(lift_hi[1], Tag::Measured)}},
                       {"dist(P,Gamma)/l(Q)", {tagged(lift_lo[2], Tag::Measured), tagged(lift_hi[2], Tag::Measured)}},
                       {"l(I)/l(Q)", {tagged(lift_lo[3], Tag::Measured), tagged(lift_hi[3], Tag::Measured)}}};
  j["hidden_balls"] = {{"balls", hidden_balls}, {"violations", hidden_violations}, {"unresolved", hidden_unresolved}};
  j["containment_chain_violations"] = chain_violations;
  j["sigma_faces"] = {{"min_side_over_theta_l", tagged(min_face_ratio, Tag::Measured)},
                      {"violations", face_violations}};
  j["local_global_consistency"] = {{"samples", consistency_samples}, {"violations", consistency_violations}};
  j["local_ball_violations"] = local_ball_violations;
  j["notes"] = notes;
  j["ok"] = ok();
  return j;
}

StructuralReport structural_props(const SawtoothDomain& dom, std::uint64_t seed, int max_cubes) {
  StructuralReport rep;
  const RegionSets& R = dom.regions();
  const RegionConstants& K = R.constants();
  const DyadicTree& t = R.tree();
  const WhitneyGrid& G = R.grid();
  const Boundary& g = *G.boundary();
  const int n = dom.n();
  const double sn = sqrt_n(n);
  const double theta = G.theta();
  const double leaf = std::ldexp(1.0, -G.k_leaf());
  const Family& F = dom.family();
  const auto& stop = F.stop_generation();
  int q0 = dom.q0();
  int qb = q0 >= 0 ? t.cube(q0).begin : 0, qe = q0 >= 0 ? t.cube(q0).end : t.atom_count();
  std::mt19937_64 rng(seed);

  // Simultaneous corkscrews at the corkscrew box centres.
  std::vector<int> cubes;
  for (int q : t.canonical_cubes()) {
    if (q0 >= 0 ? !F.in_local(t, q, q0) : !F.in_sawtooth(t, q)) continue;
    cubes.push_back(q);
  }
  if (static_cast<int>(cubes.size()) > max_cubes) {
    std::vector<int> pick;
    for (int i = 0; i < max_cubes; ++i) pick.push_back(cubes[(i * cubes.size()) / max_cubes]);
    cubes.swap(pick);
  }
  rep.cs_min_ratio = kInf;
  for (int q : cubes) {
    long cb = R.corkscrew_box(q);
    if (cb < 0) {
      rep.notes.push_back("cube " + std::to_string(q) + " below Whitney resolution");
      continue;
    }
    ++rep.cs_cubes;
    double l = t.cube(q).length();
    double rQ = 6.0 * sn * K.A2 * l;
    Point X = G.at(cb).box(n).center();
    double reach = 0.0;
    for (int a = t.cube(q).begin; a < t.cube(q).end; ++a) reach = std::max(reach, dist(X, t.atom(a), n));
    double rad = dom.contains(X) ? std::min(dom.boundary_distance(X), rQ - reach) : 0.0;
    rep.cs_min_ratio = std::min(rep.cs_min_ratio, rad / rQ);
    if (rad >= K.c_simultaneous * rQ) ++rep.cs_found;
  }
  if (rep.cs_cubes == 0) rep.cs_min_ratio = 0.0;

  // Lifted cubes and hidden balls.
  rep.lift_lo.fill(kInf);
  rep.lift_hi.fill(0.0);
  int used = 0;
  for (int qj : F.cubes()) {
    if (used >= max_cubes) break;
    if (q0 >= 0 && !t.contains(q0, qj)) continue;
    ++used;
    const Cube& Q = t.cube(qj);
    double l = Q.length();
    Point xq = Q.center_atom >= 0 ? t.atom(Q.center_atom) : Q.center;
    ++rep.lifted;
    double search = 4.0 * sn * K.A2 * l;
    double best_score = -1.0;
    std::array<double, 4> vals{};
    for (const Face& f : dom.faces()) {
      if (f.proxy) continue;
      Box b = f.box(n, theta);
      if (b.distance_to(xq) > search) continue;
      double lp = 0.0;
      for (int i = 0; i < n; ++i)
        if (i != f.axis) lp = std::max(lp, b.side(i));
      double dq = kInf;
      for (int a = Q.begin; a < Q.end; ++a) dq = std::min(dq, b.distance_to(t.atom(a)));
      double score = lp / std::max(dq, lp);
      if (score > best_score) {
        best_score = score;
        vals = {lp / l, dq / l, g.box_distance(b) / l, G.at(f.owner).length() / l};
      }
    }
    if (best_score > 0) {
      ++rep.lifted_found;
      for (int i = 0; i < 4; ++i) {
        rep.lift_lo[i] = std::min(rep.lift_lo[i], vals[i]);
        rep.lift_hi[i] = std::max(rep.lift_hi[i], vals[i]);
      }
    }
    // Hidden balls for Q_j and its children.
    std::vector<int> sub{qj};
    for (int c = 0; c < Q.n_children; ++c) sub.push_back(Q.first_child + c);
    for (int q : sub) {
      const Cube& C = t.cube(q);
      double rad = K.a0 * C.length() * K.a2 / (5.0 * K.A2);
      Point xc = C.center_atom >= 0 ? t.atom(C.center_atom) : C.center;
      ++rep.hidden_balls;
      if (rad < 4.0 * sn * leaf) ++rep.hidden_unresolved;
      for (std::uint64_t i = 1; i <= 64; ++i) {
        bool ok = false;
        Point Y = halton_in_ball(i, xc, rad, n, ok);
        if (!ok || g.distance(Y) == 0.0) continue;
        if (dom.contains(Y)) {
          ++rep.hidden_violations;
          break;
        }
      }
    }
  }
  if (rep.lifted_found == 0) {
    rep.lift_lo.fill(0.0);
  }

  // Atomwise containment chain.
  const KdTree& akd = R.atom_index();
  for (int a = qb; a < qe; ++a) {
    bool under = stop[a] < kNoStop;
    if (!under) {
      if (!dom.atom_on_boundary(a)) ++rep.chain_violations;
      continue;
    }
    int j = F.owner(a);
    const Cube& Qj = t.cube(F.cubes()[j]);
    auto [o, dout] = akd.nearest_if(t.atom(a), [&](int b) { return b < Qj.begin || b >= Qj.end; });
    double margin = 8.0 * sn * leaf;
    if ((o < 0 || dout > margin) && dom.atom_on_boundary(a)) ++rep.chain_violations;
  }

  // Sigma faces.
  rep.min_face_ratio = dom.stats().min_face_ratio;
  for (const Face& f : dom.faces()) {
    if (f.proxy) continue;
    Box b = f.box(n, theta);
    double l = G.at(f.owner).length();
    for (int i = 0; i < n; ++i)
      if (i != f.axis && b.side(i) < theta * l / 4.0) {
        ++rep.face_violations;
        break;
      }
  }

  // Local domain inside its ball, and local/global consistency.
  if (q0 >= 0) {
    const Cube& Q0 = t.cube(q0);
    Point x0 = Q0.center_atom >= 0 ? t.atom(Q0.center_atom) : Q0.center;
    double rad = 7.0 * sn * K.A2 * Q0.length();
    for (std::size_t id = 0; id < G.size(); ++id)
      if (dom.cell_in(id) && dist(G.at(id).box(n).center(), x0, n) >= rad) ++rep.local_ball_violations;
    std::vector<int> subs;
    for (int c = 0; c < Q0.n_children && subs.size() < 2; ++c) {
      int q = Q0.first_child + c;
      if (F.in_local(t, q, q0)) subs.push_back(q);
    }
    auto regions = std::shared_ptr<const RegionSets>(&R, [](const RegionSets*) {});
    for (int q : subs) {
      SawtoothDomain local = SawtoothDomain::build(regions, F, q);
      const Cube& C = t.cube(q);
      Point xc = C.center_atom >= 0 ? t.atom(C.center_atom) : C.center;
      double r = K.a0 * K.a2 * C.length() / (10.0 * K.A2);
      for (std::uint64_t i = 1; i <= 256; ++i) {
        bool ok = false;
        Point Y = halton_in_ball(i, xc, r, n, ok);
        if (!ok) continue;
        ++rep.consistency_samples;
        if (dom.contains(Y) != local.contains(Y)) ++rep.consistency_violations;
      }
    }
  } else {
    rep.notes.push_back("global domain: local/global consistency not applicable");
  }
  (void)rng;
  return rep;
}

Family parse_family(const DyadicTree& t, const std::string& spec, std::uint64_t seed, int q0) {
  std::istringstream is(spec);
  std::string head;
  is >> head;
  if (head == "none" || head.empty()) return Family(t, {});
  if (head == "random") {
    std::string arg;
    is >> arg;
    double p = 0.0;
    if (arg.rfind("p=", 0) != 0) throw ConfigError("family spec 'random' expects p=<prob>");
    try {
      p = std::stod(arg.substr(2));
    } catch (const std::exception&) {
      throw ConfigError("bad probability in family spec: " + arg);
    }
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("family probability must lie in [0, 1]");
    return random_family(t, p, seed, q0);
  }
  throw ConfigError("unknown family spec: " + spec);
}

}  // namespace saw
