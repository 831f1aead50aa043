#pragma once

#include <array>
#include <memory>
#include <vector>

#include "saw/boundary.hpp"
#include "saw/dyadic.hpp"

namespace saw {

enum class CellClass : char { Interior = 0, Collar = 1, Far = 2 };

using CellIndex = std::array<int, kMaxDim>;

// Uniform cell-centred mesh of a cubical window. Cells whose centre lies within h of Gamma form the collar;
// remaining cells touching the window boundary form the far field.
class Grid {
 public:
  static std::shared_ptr<const Grid> build(BoundaryPtr g, const Box& window, int cells_per_axis);

  int n() const { return n_; }
  int N() const { return N_; }
  double h() const { return h_; }
  double cell_volume() const { return std::pow(h_, n_); }
  const Box& window() const { return window_; }
  const Boundary& boundary() const { return *g_; }
  BoundaryPtr boundary_ptr() const { return g_; }

  std::size_t size() const { return cls_.size(); }
  std::size_t index(const CellIndex& c) const;
  CellIndex coords(std::size_t id) const;
  Point center(std::size_t id) const;
  // Cell containing X (half-open), -1 outside the window.
  long cell_of(const Point& X) const;

  CellClass cls(std::size_t id) const { return cls_[id]; }
  double delta(std::size_t id) const { return delta_[id]; }

  // Unknown numbering of interior cells and Dirichlet numbering of collar and far cells.
  const std::vector<std::size_t>& interior() const { return interior_; }
  const std::vector<std::size_t>& dirichlet() const { return dirichlet_; }
  int unknown(std::size_t id) const { return slot_[id]; }  // valid for interior cells
  int dirichlet_slot(std::size_t id) const { return slot_[id]; }  // valid for collar and far cells

  // Nearest point of Gamma for collar cells.
  const Point& foot(std::size_t id) const { return foot_[id]; }

  // Atom of the tree nearest to the foot of each Dirichlet node; -1 for far nodes.
  std::vector<int> dirichlet_atoms(const DyadicTree& t) const;

 private:
  BoundaryPtr g_;
  Box window_;
  int n_ = 0, N_ = 0;
  double h_ = 0.0;
  std::vector<CellClass> cls_;
  std::vector<double> delta_;
  std::vector<int> slot_;
  std::vector<std::size_t> interior_, dirichlet_;
  std::vector<Point> foot_;
};

using GridPtr = std::shared_ptr<const Grid>;

}  // namespace saw
