#include "saw/dyadic.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_map>

namespace saw {

namespace {

struct CellKey {
  std::array<long long, kMaxDim> c{};
  bool operator==(const CellKey& o) const { return c == o.c; }
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::size_t h = 1469598103934665603ULL;
    for (long long v : k.c) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ULL;
    return h;
  }
};

CellKey cell_of(const Point& x, double s, int n) {
  CellKey k;
  for (int i = 0; i < n; ++i) k.c[i] = static_cast<long long>(std::floor(x[i] / s));
  return k;
}

// Calls f(key) for the 3^n cells around key.
template <class F>
void for_neighbors(const CellKey& key, int n, F f) {
  int total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  for (int id = 0; id < total; ++id) {
    CellKey k = key;
    int rem = id;
    for (int i = 0; i < n; ++i) {
      k.c[i] += rem % 3 - 1;
      rem /= 3;
    }
    f(k);
  }
}

double dist2(const Point& a, const Point& b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

TreeMode parse_tree_mode(const std::string& s) {
  if (s == "nets") return TreeMode::Nets;
  if (s == "standard") return TreeMode::Standard;
  if (s == "self-similar") return TreeMode::SelfSimilar;
  throw ConfigError("dyadic.mode must be nets, standard or self-similar");
}

DyadicTree DyadicTree::build(BoundaryPtr g, int k_min, int k_max) {
  return build(g, k_min, k_max, g->kind() == "affine" ? TreeMode::Standard : TreeMode::Nets);
}

DyadicTree DyadicTree::build(BoundaryPtr g, int k_min, int k_max, TreeMode mode) {
  if (!(k_min < k_max)) throw ConfigError("dyadic.k_min must be below dyadic.k_max");
  DyadicTree t;
  t.g_ = g;
  t.k_min_ = k_min;
  t.k_max_ = k_max;
  t.mode_ = mode;
  auto atoms = g->atoms(k_max);
  if (atoms.empty()) throw ConfigError("window trace of the boundary is empty");
  const int N = static_cast<int>(atoms.size());
  const int G = k_max - k_min + 1;
  const int n = g->n();
  t.atoms_.resize(N);
  t.mass_.resize(N);
  for (int a = 0; a < N; ++a) {
    t.atoms_[a] = atoms[a].x;
    t.mass_[a] = atoms[a].mass;
  }
  std::vector<std::vector<int>> labels(G, std::vector<int>(N));
  std::vector<std::vector<Point>> centers(G);
  std::vector<std::vector<int>> center_atoms(G);

  if (mode == TreeMode::Standard) {
    auto* aff = dynamic_cast<const AffineBoundary*>(g.get());
    if (!aff) throw ConfigError("standard dyadic cubes need an affine boundary");
    const int d = aff->dim();
    const double top = std::ldexp(1.0, -k_min);
    for (int i = 0; i < d; ++i) {
      double lo = g->window().lo[i] / top, hi = g->window().hi[i] / top;
      if (lo != std::floor(lo) || hi != std::floor(hi))
        throw ConfigError("flat window trace must be aligned to 2^-k_min");
    }
    for (int gi = 0; gi < G; ++gi) {
      const double s = std::ldexp(1.0, -(k_min + gi));
      std::map<std::array<long long, kMaxDim>, int> ids;
      std::vector<std::array<long long, kMaxDim>> keys(N);
      for (int a = 0; a < N; ++a) {
        std::array<long long, kMaxDim> c{};
        for (int i = 0; i < d; ++i) c[i] = static_cast<long long>(std::floor(t.atoms_[a][i] / s));
        keys[a] = c;
        ids.emplace(c, 0);
      }
      int next = 0;
      for (auto& [c, id] : ids) {
        id = next++;
        Point p{};
        for (int i = 0; i < d; ++i) p[i] = (c[i] + 0.5) * s;
        centers[gi].push_back(p);
        center_atoms[gi].push_back(-1);
      }
      for (int a = 0; a < N; ++a) labels[gi][a] = ids[keys[a]];
    }
  } else if (mode == TreeMode::SelfSimilar) {
    auto* cs = dynamic_cast<const CantorBoundary*>(g.get());
    if (!cs || cs->cross_axis()) throw ConfigError("self-similar cubes need a Cantor boundary crossed with a point");
    if (g->window().lo[0] > 0.0 || g->window().hi[0] < 1.0)
      throw ConfigError("self-similar cubes need the whole Cantor set inside the window");
    const int m = cs->pieces(), J = cs->depth();
    for (int gi = 0; gi < G; ++gi) {
      int k = k_min + gi;
      int j = static_cast<int>(std::ceil(k * std::log(2.0) / std::log(1.0 / cs->ratio()) - 1e-12));
      if (j > J) throw ConfigError("dyadic.k_max exceeds the Cantor depth");
      long long block = 1;
      for (int q = j; q < J; ++q) block *= m;
      int pieces = static_cast<int>(N / block);
      for (int a = 0; a < N; ++a) labels[gi][a] = static_cast<int>(a / block);
      for (int p = 0; p < pieces; ++p) {
        int b0 = static_cast<int>(p * block), b1 = static_cast<int>((p + 1) * block);
        double mid = 0.5 * (t.atoms_[b0][0] + t.atoms_[b1 - 1][0]);
        int best = b0;
        for (int a = b0; a < b1; ++a)
          if (std::abs(t.atoms_[a][0] - mid) < std::abs(t.atoms_[best][0] - mid)) best = a;
        centers[gi].push_back(t.atoms_[best]);
        center_atoms[gi].push_back(best);
      }
    }
  } else {
    // Greedy maximal 2^-k separated nets, each containing the previous one.
    std::vector<int> net;
    std::vector<int> net_count(G);
    for (int gi = 0; gi < G; ++gi) {
      const double s = std::ldexp(1.0, -(k_min + gi));
      const double s2 = s * s;
      std::unordered_map<CellKey, std::vector<int>, CellHash> grid;
      for (int p = 0; p < static_cast<int>(net.size()); ++p) grid[cell_of(t.atoms_[net[p]], s, n)].push_back(p);
      for (int a = 0; a < N; ++a) {
        CellKey key = cell_of(t.atoms_[a], s, n);
        bool free = true;
        for_neighbors(key, n, [&](const CellKey& k) {
          if (!free) return;
          auto it = grid.find(k);
          if (it == grid.end()) return;
          for (int p : it->second)
            if (dist2(t.atoms_[net[p]], t.atoms_[a], n) < s2) {
              free = false;
              return;
            }
        });
        if (free) {
          grid[key].push_back(static_cast<int>(net.size()));
          net.push_back(a);
        }
      }
      net_count[gi] = static_cast<int>(net.size());
    }
    // Nearest net point among the first `count` entries, lowest index on ties.
    auto nearest_in = [&](const Point& x, double s, int count,
                          const std::unordered_map<CellKey, std::vector<int>, CellHash>& grid) {
      int best = -1;
      double bd = std::numeric_limits<double>::infinity();
      for_neighbors(cell_of(x, s, n), n, [&](const CellKey& k) {
        auto it = grid.find(k);
        if (it == grid.end()) return;
        for (int p : it->second) {
          if (p >= count) continue;
          double dd = dist2(t.atoms_[net[p]], x, n);
          if (dd < bd || (dd == bd && p < best)) {
            bd = dd;
            best = p;
          }
        }
      });
      return best;
    };
    auto grid_for = [&](int gi) {
      const double s = std::ldexp(1.0, -(k_min + gi));
      std::unordered_map<CellKey, std::vector<int>, CellHash> grid;
      for (int p = 0; p < net_count[gi]; ++p) grid[cell_of(t.atoms_[net[p]], s, n)].push_back(p);
      return grid;
    };
    {
      const int gi = G - 1;
      const double s = std::ldexp(1.0, -k_max);
      auto grid = grid_for(gi);
      for (int a = 0; a < N; ++a) {
        int p = nearest_in(t.atoms_[a], s, net_count[gi], grid);
        if (p < 0) throw VerificationError("net construction failed at the leaf generation");
        labels[gi][a] = p;
      }
    }
    for (int gi = G - 2; gi >= 0; --gi) {
      const double s = std::ldexp(1.0, -(k_min + gi));
      auto grid = grid_for(gi);
      std::vector<int> parent(net_count[gi + 1]);
      for (int p = 0; p < net_count[gi + 1]; ++p) {
        parent[p] = p < net_count[gi] ? p : nearest_in(t.atoms_[net[p]], s, net_count[gi], grid);
        if (parent[p] < 0) throw VerificationError("net construction failed: orphan net point");
      }
      for (int a = 0; a < N; ++a) labels[gi][a] = parent[labels[gi + 1][a]];
    }
    for (int gi = 0; gi < G; ++gi) {
      centers[gi].resize(net_count[gi]);
      center_atoms[gi].resize(net_count[gi]);
      for (int p = 0; p < net_count[gi]; ++p) {
        centers[gi][p] = t.atoms_[net[p]];
        center_atoms[gi][p] = net[p];
      }
    }
  }
  t.assemble(labels, centers, center_atoms);
  return t;
}

void DyadicTree::assemble(const std::vector<std::vector<int>>& labels,
                          const std::vector<std::vector<Point>>& centers,
                          const std::vector<std::vector<int>>& center_atoms) {
  const int N = static_cast<int>(atoms_.size());
  const int G = static_cast<int>(labels.size());
  const int n = g_->n();
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int gi = 0; gi < G; ++gi)
      if (labels[gi][a] != labels[gi][b]) return labels[gi][a] < labels[gi][b];
    return a < b;
  });
  std::vector<int> new_pos(N);
  for (int i = 0; i < N; ++i) new_pos[order[i]] = i;
  std::vector<Point> atoms(N);
  std::vector<double> mass(N);
  original_.resize(N);
  for (int i = 0; i < N; ++i) {
    atoms[i] = atoms_[order[i]];
    mass[i] = mass_[order[i]];
    original_[i] = order[i];
  }
  atoms_.swap(atoms);
  mass_.swap(mass);

  std::vector<double> prefix(N + 1, 0.0);
  for (int i = 0; i < N; ++i) prefix[i + 1] = prefix[i] + mass_[i];

  gens_.assign(G, {});
  owner_.assign(G, std::vector<int>(N));
  for (int gi = 0; gi < G; ++gi) {
    int start = 0;
    for (int i = 1; i <= N; ++i) {
      if (i < N && labels[gi][order[i]] == labels[gi][order[start]]) continue;
      Cube c;
      c.k = k_min_ + gi;
      c.index = static_cast<int>(gens_[gi].size());
      c.begin = start;
      c.end = i;
      int lab = labels[gi][order[start]];
      c.center = centers[gi][lab];
      c.center_atom = center_atoms[gi][lab] >= 0 ? new_pos[center_atoms[gi][lab]] : -1;
      c.mass = 0.0;
      for (int a = start; a < i; ++a) c.mass += mass_[a];
      int id = static_cast<int>(cubes_.size());
      c.born = c.k;
      c.canonical = id;
      if (gi > 0) {
        c.parent = owner_[gi - 1][start];
        Cube& p = cubes_[c.parent];
        if (p.first_child < 0) p.first_child = id;
        ++p.n_children;
      }
      for (int a = start; a < i; ++a) owner_[gi][a] = id;
      cubes_.push_back(c);
      gens_[gi].push_back(id);
      start = i;
    }
  }
  for (auto& c : cubes_)
    if (c.parent >= 0 && cubes_[c.parent].n_children == 1) {
      c.born = cubes_[c.parent].born;
      c.canonical = cubes_[c.parent].canonical;
    }

  kd_ = KdTree(atoms_, n);
  min_spacing_ = std::numeric_limits<double>::infinity();
  for (int a = 0; a < N; ++a) {
    auto [b, dd] = kd_.nearest_if(atoms_[a], [a](int i) { return i != a; });
    if (b >= 0) min_spacing_ = std::min(min_spacing_, dd);
  }
}

std::vector<int> DyadicTree::canonical_cubes() const {
  std::vector<int> out;
  for (int q = 0; q < cube_count(); ++q)
    if (cubes_[q].canonical == q) out.push_back(q);
  return out;
}

int DyadicTree::last_generation(int q) const {
  int c = q;
  while (cubes_[c].n_children == 1) c = cubes_[c].first_child;
  return cubes_[c].k;
}

std::vector<Json> DyadicTree::export_lines() const {
  std::vector<Json> out;
  out.reserve(cubes_.size());
  for (const auto& c : cubes_) {
    Json j;
    j["id"] = {c.k, c.index};
    if (c.parent >= 0)
      j["parent"] = {cubes_[c.parent].k, cubes_[c.parent].index};
    else
      j["parent"] = nullptr;
    Json ctr = Json::array();
    for (int i = 0; i < g_->n(); ++i) ctr.push_back(c.center[i]);
    j["center"] = ctr;
    j["ell"] = c.length();
    j["sigma"] = c.mass;
    j["canonical"] = c.canonical == static_cast<int>(&c - cubes_.data());
    Json ids = Json::array();
    for (int a = c.begin; a < c.end; ++a) ids.push_back(original_[a]);
    j["atoms"] = ids;
    out.push_back(std::move(j));
  }
  return out;
}

// ------------------------------------------------------------ verification

double proper_child_constant(double d, double cd, double a0, double A0) {
  return a0 / (std::pow(2.0, (2.0 * d + 1.0) / d) * std::pow(cd, 2.0 / d) * A0);
}

Json GridReport::to_json() const {
  Json j;
  j["partition"] = partition;
  j["nesting"] = nesting;
  j["unique_ancestor"] = unique_ancestor;
  j["diameter"] = diameter;
  j["inscribed_ball"] = inscribed;
  j["thin_boundary"] = thin_boundary;
  j["mass_bounds"] = mass_bounds;
  j["child_count"] = children;
  j["bandwidth"] = bandwidth;
  j["proper_child_length"] = proper_child;
  j["a0"] = tagged(a0, a0 == a0_fit ? Tag::Fitted : Tag::Formula);
  j["A0"] = tagged(A0, A0 == A0_fit ? Tag::Fitted : Tag::Formula);
  j["a0_fit"] = tagged(a0_fit, Tag::Fitted);
  j["A0_fit"] = tagged(A0_fit, Tag::Fitted);
  j["C_d"] = tagged(cd, Tag::Formula);
  j["c_K"] = tagged(ck, Tag::Formula);
  j["zeta"] = tagged(zeta, Tag::Fitted);
  j["thin_A"] = tagged(thin_A, Tag::Fitted);
  j["max_children"] = max_children;
  j["child_bound"] = tagged(child_bound, Tag::Formula);
  j["max_bandwidth"] = max_bandwidth;
  j["bandwidth_bound"] = tagged(bandwidth_bound, Tag::Formula);
  Json curve = Json::array();
  for (auto& [rho, v] : thin_curve) curve.push_back({{"rho", rho}, {"sup_ratio", tagged(v, Tag::Measured)}});
  j["thin_curve"] = curve;
  j["failures"] = failures;
  j["ok"] = ok();
  return j;
}

GridReport verify_grid(const DyadicTree& t, double a0_declared, double A0_declared) {
  GridReport rep;
  const int n = t.boundary().n();
  const double d = t.boundary().d();
  const int N = t.atom_count();
  auto fail = [&](bool& flag, const std::string& msg) {
    flag = false;
    if (rep.failures.size() < 50) rep.failures.push_back(msg);
  };
  auto name = [&](int q) {
    return "cube(" + std::to_string(t.cube(q).k) + "," + std::to_string(t.cube(q).index) + ")";
  };

  // (i) partition, (ii) nesting, (iii) unique ancestor.
  for (int k = t.k_min(); k <= t.k_max(); ++k) {
    int expect = 0;
    for (int q : t.generation(k)) {
      const Cube& c = t.cube(q);
      if (c.begin != expect || c.end <= c.begin) fail(rep.partition, "generation " + std::to_string(k) + " gap at " + name(q));
      expect = c.end;
      for (int a = c.begin; a < c.end; ++a)
        if (t.cube_of(a, k) != q) fail(rep.partition, "atom ownership mismatch in " + name(q));
      if (k > t.k_min()) {
        if (c.parent < 0 || !t.contains(c.parent, q)) fail(rep.nesting, name(q) + " escapes its parent");
        int holders = 0;
        for (int p : t.generation(k - 1))
          if (t.cube(p).begin < c.end && c.begin < t.cube(p).end) ++holders;
        if (holders != 1) fail(rep.unique_ancestor, name(q) + " meets " + std::to_string(holders) + " parents");
      }
      if (c.n_children > 0) {
        int b = c.begin;
        for (int ch = c.first_child; ch < c.first_child + c.n_children; ++ch) {
          if (t.cube(ch).begin != b) fail(rep.nesting, "children of " + name(q) + " do not tile it");
          b = t.cube(ch).end;
        }
        if (b != c.end) fail(rep.nesting, "children of " + name(q) + " do not tile it");
      }
    }
    if (expect != N) fail(rep.partition, "generation " + std::to_string(k) + " misses atoms");
  }

  // Fitted centring constants.
  std::vector<double> out_center(t.cube_count(), std::numeric_limits<double>::infinity());
  std::vector<double> reach(t.cube_count(), 0.0), diam(t.cube_count(), 0.0);
  parallel_for(t.cube_count(), [&](std::size_t qq) {
    int q = static_cast<int>(qq);
    const Cube& c = t.cube(q);
    if (c.canonical != q) return;
    Point lo = t.atom(c.begin), hi = lo;
    double far = 0.0;
    for (int a = c.begin; a < c.end; ++a) {
      far = std::max(far, dist(t.atom(a), c.center, n));
      for (int i = 0; i < n; ++i) {
        lo[i] = std::min(lo[i], t.atom(a)[i]);
        hi[i] = std::max(hi[i], t.atom(a)[i]);
      }
    }
    double dd = 0.0;
    for (int i = 0; i < n; ++i) dd += (hi[i] - lo[i]) * (hi[i] - lo[i]);
    diam[q] = std::sqrt(dd);
    reach[q] = far;
  });
  // Nearest atom outside each canonical cube, seen from its centre.
  {
    std::vector<Point> pts(N);
    for (int a = 0; a < N; ++a) pts[a] = t.atom(a);
    KdTree kd(pts, n);
    parallel_for(t.cube_count(), [&](std::size_t qq) {
      int q = static_cast<int>(qq);
      const Cube& c = t.cube(q);
      if (c.canonical != q) return;
      auto res = kd.nearest_if(c.center, [&](int i) { return i < c.begin || i >= c.end; });
      if (res.first >= 0) out_center[q] = res.second;
    });
  }
  rep.a0_fit = 1.0;
  rep.A0_fit = 1.0;
  for (int q = 0; q < t.cube_count(); ++q) {
    const Cube& c = t.cube(q);
    const Cube& canon = t.cube(c.canonical);
    double scale = std::ldexp(1.0, -c.k);
    rep.A0_fit = std::max(rep.A0_fit, diam[c.canonical] / scale * (1.0 + 1e-12));
    rep.A0_fit = std::max(rep.A0_fit, reach[c.canonical] / canon.length() * (1.0 + 1e-12));
    if (c.canonical == q) rep.a0_fit = std::min(rep.a0_fit, out_center[q] / c.length());
  }
  rep.a0 = a0_declared > 0 ? a0_declared : rep.a0_fit;
  rep.A0 = A0_declared > 0 ? A0_declared : rep.A0_fit;
  rep.cd = t.boundary().adr_constant();
  rep.ck = proper_child_constant(d, rep.cd, rep.a0, rep.A0);

  // (iv), (v) and the mass bounds.
  for (int q = 0; q < t.cube_count(); ++q) {
    const Cube& c = t.cube(q);
    double scale = std::ldexp(1.0, -c.k);
    if (!(diam[c.canonical] < rep.A0 * scale)) fail(rep.diameter, name(q) + " diameter too large");
    if (c.canonical != q) continue;
    double ell = c.length();
    if (out_center[q] < rep.a0 * ell * (1 - 1e-12)) fail(rep.inscribed, name(q) + " inscribed ball leaves the cube");
    if (!(reach[q] < rep.A0 * ell)) fail(rep.inscribed, name(q) + " exceeds the circumscribed ball");
    double lo = std::pow(rep.a0 * ell, d) / rep.cd, hi = rep.cd * std::pow(rep.A0 * ell, d);
    if (c.mass < lo * (1 - 1e-12) || c.mass > hi * (1 + 1e-12)) fail(rep.mass_bounds, name(q) + " mass out of band");
  }

  // Child count, bandwidth and proper-child lengths.
  rep.child_bound = rep.cd * rep.cd * std::pow(2.0 * rep.A0 / rep.a0, d);
  rep.bandwidth_bound = std::log2(std::pow(2.0, (d + 1.0) / d) * std::pow(rep.cd, 2.0 / d) * rep.A0 / rep.a0);
  for (int q = 0; q < t.cube_count(); ++q) {
    const Cube& c = t.cube(q);
    rep.max_children = std::max(rep.max_children, c.n_children);
    if (c.n_children > rep.child_bound) fail(rep.children, name(q) + " has too many children");
    if (c.canonical != q) continue;
    int band = t.last_generation(q) - c.born + 1;
    // The youngest generation is a truncation artefact, not a genuine repeat.
    if (t.last_generation(q) == t.k_max()) continue;
    rep.max_bandwidth = std::max(rep.max_bandwidth, band);
    if (band > rep.bandwidth_bound) fail(rep.bandwidth, name(q) + " repeats over too many generations");
    int last = q;
    while (t.cube(last).n_children == 1) last = t.cube(last).first_child;
    for (int ch = t.cube(last).first_child; ch >= 0 && ch < t.cube(last).first_child + t.cube(last).n_children; ++ch) {
      double ratio = t.cube(ch).length() / c.length();
      if (!(ratio < 1.0) || ratio < rep.ck * (1 - 1e-12)) fail(rep.proper_child, name(ch) + " proper child length out of band");
    }
  }

  // (vi) thin boundary layers for rho in (0, a0). zeta is the largest exponent with ratio(rho) <= A0 rho^zeta
  // on the rho grid.
  std::vector<double> rhos;
  for (int j = 1; j <= 16; ++j)
    if (std::pow(2.0, -0.5 * j) < rep.a0) rhos.push_back(std::pow(2.0, -0.5 * j));
  const int G = t.k_max() - t.k_min() + 1;
  const double spacing = t.min_spacing();
  std::vector<std::vector<double>> dout(N, std::vector<double>(G, std::numeric_limits<double>::infinity()));
  {
    std::vector<Point> pts(N);
    for (int a = 0; a < N; ++a) pts[a] = t.atom(a);
    KdTree kd(pts, n);
    const double rho_max = rhos.front();
    parallel_for(N, [&](std::size_t aa) {
      int a = static_cast<int>(aa);
      for (int gi = 0; gi < G; ++gi) {
        const double cap = rho_max * std::ldexp(1.0, -(t.k_min() + gi));
        const Cube& c = t.cube(t.cube_of(a, t.k_min() + gi));
        for (int b : kd.within(t.atom(a), cap * (1 + 1e-12)))
          if (b < c.begin || b >= c.end) dout[a][gi] = std::min(dout[a][gi], dist(t.atom(a), t.atom(b), n));
      }
    });
  }
  for (double rho : rhos) {
    double sup = 0.0;
    bool any = false;
    for (int q = 0; q < t.cube_count(); ++q) {
      const Cube& c = t.cube(q);
      const double thr = rho * std::ldexp(1.0, -c.k);
      // A cube enters only when every rho of the grid resolves it, so all points of the curve see the same cubes.
      if (rhos.back() * std::ldexp(1.0, -c.k) < 2.0 * spacing) continue;
      any = true;
      int gi = c.k - t.k_min();
      double m = 0.0;
      for (int a = c.begin; a < c.end; ++a)
        if (dout[a][gi] <= thr) m += t.atom_mass(a);
      sup = std::max(sup, m / c.mass);
    }
    if (any) rep.thin_curve.emplace_back(rho, sup);
  }
  if (rep.thin_curve.size() < 2) {
    fail(rep.thin_boundary, "thin-boundary curve has too few resolved scales");
  } else {
    rep.zeta = std::numeric_limits<double>::infinity();
    for (auto& [rho, v] : rep.thin_curve)
      if (v > 0.0) rep.zeta = std::min(rep.zeta, std::log(rep.A0 / v) / std::log(1.0 / rho));
    rep.thin_A = 0.0;
    for (auto& [rho, v] : rep.thin_curve)
      if (v > 0.0) rep.thin_A = std::max(rep.thin_A, v / std::pow(rho, rep.zeta));
    if (!(rep.zeta > 0.0)) fail(rep.thin_boundary, "thin-boundary exponent is not positive for the grid constant A0");
  }
  return rep;
}

// ------------------------------------------------------------ families

Family::Family(const DyadicTree& t, std::vector<int> cubes) : cubes_(std::move(cubes)) {
  for (int& q : cubes_) q = t.cube(q).canonical;
  std::sort(cubes_.begin(), cubes_.end(), [&](int a, int b) { return t.cube(a).begin < t.cube(b).begin; });
  cubes_.erase(std::unique(cubes_.begin(), cubes_.end()), cubes_.end());
  stop_.assign(t.atom_count(), kNoStop);
  owner_.assign(t.atom_count(), -1);
  for (std::size_t j = 0; j < cubes_.size(); ++j) {
    const Cube& c = t.cube(cubes_[j]);
    if (j > 0 && t.cube(cubes_[j - 1]).end > c.begin) throw ConfigError("family cubes are not pairwise disjoint");
    for (int a = c.begin; a < c.end; ++a) {
      stop_[a] = c.born;
      owner_[a] = static_cast<int>(j);
    }
  }
}

bool Family::in_sawtooth(const DyadicTree& t, int q) const {
  const Cube& c = t.cube(q);
  return c.born < stop_[c.begin];
}

Family random_family(const DyadicTree& t, double p, std::uint64_t seed, int q0) {
  std::mt19937_64 rng(seed);
  std::vector<char> covered(t.atom_count(), 0);
  std::vector<int> chosen;
  int k0 = q0 >= 0 ? t.cube(q0).born + 1 : t.k_min() + 1;
  for (int k = k0; k <= t.k_max(); ++k)
    for (int q : t.generation(k)) {
      const Cube& c = t.cube(q);
      if (c.canonical != q) continue;
      if (q0 >= 0 && !t.contains(q0, q)) continue;
      if (q0 >= 0 && c.begin == t.cube(q0).begin && c.end == t.cube(q0).end) continue;
      if (covered[c.begin]) continue;
      if (uniform01(rng) < p) {
        chosen.push_back(q);
        std::fill(covered.begin() + c.begin, covered.begin() + c.end, 1);
      }
    }
  return Family(t, chosen);
}

double cube_average(const DyadicTree& t, int q, const std::vector<double>& f, const std::vector<double>& mu) {
  const Cube& c = t.cube(q);
  bool constant = true;
  for (int a = c.begin + 1; a < c.end && constant; ++a) constant = f[a] == f[c.begin];
  if (constant) return f[c.begin];
  double s = 0.0, m = 0.0;
  for (int a = c.begin; a < c.end; ++a) {
    s += f[a] * mu[a];
    m += mu[a];
  }
  return s / m;
}

std::vector<double> project_function(const DyadicTree& t, const Family& F, const std::vector<double>& f) {
  std::vector<double> out = f;
  for (int q : F.cubes()) {
    double avg = cube_average(t, q, f, t.atom_masses());
    const Cube& c = t.cube(q);
    std::fill(out.begin() + c.begin, out.begin() + c.end, avg);
  }
  return out;
}

std::vector<double> project_measure(const DyadicTree& t, const Family& F, const std::vector<double>& mu) {
  std::vector<double> out = mu;
  for (int q : F.cubes()) {
    const Cube& c = t.cube(q);
    double total = 0.0;
    for (int a = c.begin; a < c.end; ++a) total += mu[a];
    for (int a = c.begin; a < c.end; ++a) out[a] = t.atom_mass(a) / c.mass * total;
  }
  return out;
}

std::vector<double> sawtooth_mu(const DyadicTree& t, const Family& F, const std::vector<double>& omega,
                                const std::vector<double>& omega_star, const std::vector<double>& omega_star_P) {
  std::vector<double> out = omega_star;
  for (std::size_t j = 0; j < F.cubes().size(); ++j) {
    const Cube& c = t.cube(F.cubes()[j]);
    double wq = 0.0;
    for (int a = c.begin; a < c.end; ++a) wq += omega[a];
    for (int a = c.begin; a < c.end; ++a) out[a] = omega[a] / wq * omega_star_P[j];
  }
  return out;
}

std::vector<double> projected_sawtooth_mu(const DyadicTree& t, const Family& F, const std::vector<double>& omega_star,
                                          const std::vector<double>& omega_star_P) {
  std::vector<double> out = omega_star;
  for (std::size_t j = 0; j < F.cubes().size(); ++j) {
    const Cube& c = t.cube(F.cubes()[j]);
    for (int a = c.begin; a < c.end; ++a) out[a] = t.atom_mass(a) / c.mass * omega_star_P[j];
  }
  return out;
}

double lp_norm(const std::vector<double>& f, const std::vector<double>& mass, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      if (mass[i] > 0.0) m = std::max(m, std::abs(f[i]));
    return m;
  }
  long double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::pow(std::abs(static_cast<long double>(f[i])), p) * mass[i];
  return static_cast<double>(std::pow(s, 1.0L / p));
}

std::vector<double> dyadic_maximal(const DyadicTree& t, const std::vector<double>& f, const std::vector<double>& mu,
                                   int q0) {
  std::vector<double> absf(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) absf[i] = std::abs(f[i]);
  std::vector<double> avg(t.cube_count(), 0.0);
  for (int q = 0; q < t.cube_count(); ++q)
    if (t.contains(q0, q)) avg[q] = cube_average(t, q, absf, mu);
  std::vector<double> out(t.atom_count(), 0.0);
  const Cube& c0 = t.cube(q0);
  for (int a = c0.begin; a < c0.end; ++a)
    for (int k = c0.k; k <= t.k_max(); ++k) out[a] = std::max(out[a], avg[t.cube_of(a, k)]);
  return out;
}

StoppingResult cz_stopping(const DyadicTree& t, const std::vector<double>& f, const std::vector<double>& mu,
                           double tau, int q0) {
  StoppingResult res;
  double a0 = cube_average(t, q0, f, mu);
  if (a0 > tau) throw ConfigError("stopping threshold lies below the average on the top cube");
  std::vector<int> chosen;
  std::vector<int> stack{q0};
  while (!stack.empty()) {
    int q = stack.back();
    stack.pop_back();
    const Cube& c = t.cube(q);
    for (int ch = c.first_child; ch >= 0 && ch < c.first_child + c.n_children; ++ch) {
      double avg = cube_average(t, ch, f, mu);
      if (avg > tau) {
        chosen.push_back(t.cube(ch).canonical);
        res.max_average = std::max(res.max_average, avg);
      } else {
        stack.push_back(ch);
      }
    }
  }
  res.family = Family(t, chosen);
  const Cube& c0 = t.cube(q0);
  for (int q = 0; q < t.cube_count(); ++q) {
    const Cube& c = t.cube(q);
    if (c.parent < 0 || !t.contains(q0, q) || c.k <= c0.k) continue;
    const Cube& p = t.cube(c.parent);
    if (p.begin == c.begin && p.end == c.end) continue;
    double mp = 0.0, mc = 0.0;
    for (int a = p.begin; a < p.end; ++a) mp += mu[a];
    for (int a = c.begin; a < c.end; ++a) mc += mu[a];
    if (mc > 0.0) res.c_mu = std::max(res.c_mu, mp / mc);
  }
  return res;
}

}  // namespace saw
