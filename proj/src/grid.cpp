#include "saw/grid.hpp"

#include <cmath>
#include <string>

namespace saw {

std::shared_ptr<const Grid> Grid::build(BoundaryPtr g, const Box& window, int cells_per_axis) {
  if (cells_per_axis < 8) throw ConfigError("grid.cells must be >= 8");
  const int n = window.n;
  for (int i = 1; i < n; ++i)
    if (std::abs(window.side(i) - window.side(0)) > 1e-12 * window.side(0))
      throw ConfigError("grid window must be a cube");
  double total = std::pow(static_cast<double>(cells_per_axis), n);
  if (total > 4.2e6) throw ConfigError("grid too large: " + std::to_string(static_cast<long long>(total)) + " cells");

  auto grid = std::make_shared<Grid>();
  Grid& G = *grid;
  G.g_ = std::move(g);
  G.window_ = window;
  G.n_ = n;
  G.N_ = cells_per_axis;
  G.h_ = window.side(0) / cells_per_axis;
  const std::size_t size = static_cast<std::size_t>(total);
  G.cls_.assign(size, CellClass::Interior);
  G.delta_.assign(size, 0.0);
  G.slot_.assign(size, -1);
  G.foot_.assign(size, Point{});

  parallel_for(size, [&](std::size_t id) {
    Point X = G.center(id);
    double dl = G.g_->distance(X);
    G.delta_[id] = dl;
    if (dl <= G.h_) {
      G.cls_[id] = CellClass::Collar;
      G.foot_[id] = G.g_->nearest(X);
      return;
    }
    CellIndex c = G.coords(id);
    for (int i = 0; i < n; ++i)
      if (c[i] == 0 || c[i] == G.N_ - 1) G.cls_[id] = CellClass::Far;
  });

  for (std::size_t id = 0; id < size; ++id) {
    if (G.cls_[id] == CellClass::Interior) {
      G.slot_[id] = static_cast<int>(G.interior_.size());
      G.interior_.push_back(id);
    } else {
      G.slot_[id] = static_cast<int>(G.dirichlet_.size());
      G.dirichlet_.push_back(id);
    }
  }
  if (G.interior_.empty()) throw ConfigError("grid has no interior cells");
  return grid;
}

std::size_t Grid::index(const CellIndex& c) const {
  std::size_t id = 0;
  for (int i = n_ - 1; i >= 0; --i) id = id * N_ + c[i];
  return id;
}

CellIndex Grid::coords(std::size_t id) const {
  CellIndex c{};
  for (int i = 0; i < n_; ++i) {
    c[i] = static_cast<int>(id % N_);
    id /= N_;
  }
  return c;
}

Point Grid::center(std::size_t id) const {
  CellIndex c = coords(id);
  Point X{};
  for (int i = 0; i < n_; ++i) X[i] = window_.lo[i] + (c[i] + 0.5) * h_;
  return X;
}

long Grid::cell_of(const Point& X) const {
  CellIndex c{};
  for (int i = 0; i < n_; ++i) {
    double u = (X[i] - window_.lo[i]) / h_;
    if (!(u >= 0.0) || u >= N_) return -1;
    c[i] = static_cast<int>(std::floor(u));
  }
  return static_cast<long>(index(c));
}

std::vector<int> Grid::dirichlet_atoms(const DyadicTree& t) const {
  std::vector<int> out(dirichlet_.size(), -1);
  parallel_for(dirichlet_.size(), [&](std::size_t k) {
    std::size_t id = dirichlet_[k];
    if (cls_[id] == CellClass::Collar) out[k] = t.nearest_atom(foot_[id]);
  });
  return out;
}

}  // namespace saw
