#pragma once

// Voxel grid, topological grid and the two relations the labeling is built
// on: the Gamma-neighborhood (a j-cell's 6-neighbors of order j+1) and
// cell connectivity (two cells are connected iff they are Gamma-neighbors
// of a common cell).
//
// All coordinates handed across the public interface are 1-based. A voxel
// r maps to the cell 2r-1; a cell with j odd coordinates is a j-cell.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "errors.hpp"

namespace topogrid {

using coord_t = std::int32_t;
using label_t = std::uint32_t;

struct VoxelCoord {
  coord_t r1 = 1, r2 = 1, r3 = 1;

  friend auto operator<=>(const VoxelCoord&, const VoxelCoord&) = default;
};

struct CellCoord {
  coord_t t1 = 1, t2 = 1, t3 = 1;

  constexpr coord_t operator[](int axis) const {
    return axis == 0 ? t1 : (axis == 1 ? t2 : t3);
  }
  constexpr coord_t& operator[](int axis) {
    return axis == 0 ? t1 : (axis == 1 ? t2 : t3);
  }

  friend auto operator<=>(const CellCoord&, const CellCoord&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const CellCoord& t) {
  return os << '(' << t.t1 << ',' << t.t2 << ',' << t.t3 << ')';
}

inline std::ostream& operator<<(std::ostream& os, const VoxelCoord& r) {
  return os << '(' << r.r1 << ',' << r.r2 << ',' << r.r3 << ')';
}

// Number of odd coordinates of a cell: 3 for voxels, 2 for faces, 1 for
// edges, 0 for corners.
using CellOrder = int;

// Extents of the voxel grid. The topological grid has extents 2n-1.
class GridShape {
 public:
  constexpr GridShape() = default;
  GridShape(coord_t n1, coord_t n2, coord_t n3) : n_{n1, n2, n3} {
    for (auto n : n_) {
      // 2n-1 must stay representable as a coordinate
      if (n < 1 || n > (INT32_MAX / 2)) {
        std::ostringstream msg;
        msg << "grid extent " << n << " out of range";
        throw std::invalid_argument(msg.str());
      }
    }
  }

  constexpr coord_t voxels(int axis) const { return n_[axis]; }
  constexpr coord_t cells(int axis) const { return 2 * n_[axis] - 1; }

  constexpr std::array<coord_t, 3> voxel_extents() const { return n_; }
  constexpr std::array<coord_t, 3> cell_extents() const {
    return {cells(0), cells(1), cells(2)};
  }

  constexpr std::size_t voxel_count() const {
    return std::size_t(n_[0]) * std::size_t(n_[1]) * std::size_t(n_[2]);
  }
  constexpr std::size_t cell_count() const {
    return std::size_t(cells(0)) * std::size_t(cells(1)) * std::size_t(cells(2));
  }

  constexpr bool contains(const VoxelCoord& r) const {
    return r.r1 >= 1 && r.r1 <= n_[0] && r.r2 >= 1 && r.r2 <= n_[1] && r.r3 >= 1 &&
           r.r3 <= n_[2];
  }
  constexpr bool contains(const CellCoord& t) const {
    return t.t1 >= 1 && t.t1 <= cells(0) && t.t2 >= 1 && t.t2 <= cells(1) &&
           t.t3 >= 1 && t.t3 <= cells(2);
  }

  friend bool operator==(const GridShape&, const GridShape&) = default;

 private:
  std::array<coord_t, 3> n_{1, 1, 1};
};

inline std::ostream& operator<<(std::ostream& os, const GridShape& s) {
  return os << s.voxels(0) << 'x' << s.voxels(1) << 'x' << s.voxels(2);
}

namespace detail {

template <class Coord>
[[noreturn]] inline void throw_out_of_grid(const Coord& c, const GridShape& shape) {
  std::ostringstream msg;
  msg << "coordinate " << c << " outside grid " << shape;
  throw bounds_error(msg.str());
}

}  // namespace detail

constexpr CellOrder cell_order(const CellCoord& t) {
  return (t.t1 & 1) + (t.t2 & 1) + (t.t3 & 1);
}

inline CellOrder cell_order(const CellCoord& t, const GridShape& shape) {
  if (!shape.contains(t)) detail::throw_out_of_grid(t, shape);
  return cell_order(t);
}

inline CellCoord voxel_to_cell(const VoxelCoord& r, const GridShape& shape) {
  if (!shape.contains(r)) detail::throw_out_of_grid(r, shape);
  return {2 * r.r1 - 1, 2 * r.r2 - 1, 2 * r.r3 - 1};
}

// Inverse of voxel_to_cell; only defined for 3-cells.
inline VoxelCoord cell_to_voxel(const CellCoord& t) {
  return {(t.t1 + 1) / 2, (t.t2 + 1) / 2, (t.t3 + 1) / 2};
}

// Up to six cells, in the canonical order axis 1 (-,+), axis 2 (-,+),
// axis 3 (-,+).
class CellSet {
 public:
  void push_back(const CellCoord& t) { cells_[size_++] = t; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  const CellCoord& operator[](std::size_t i) const { return cells_[i]; }
  const CellCoord* begin() const { return cells_.data(); }
  const CellCoord* end() const { return cells_.data() + size_; }

 private:
  std::array<CellCoord, 6> cells_{};
  std::size_t size_ = 0;
};

// Gamma-neighborhood: the 6-neighbors of t that are cells of one order
// higher, i.e. t +/- 1 along each even axis. Never leaves the grid, since
// even coordinates range over 2..2n-2.
inline CellSet gamma(const CellCoord& t, const GridShape& shape) {
  if (!shape.contains(t)) detail::throw_out_of_grid(t, shape);
  CellSet out;
  for (int axis = 0; axis < 3; ++axis) {
    if (t[axis] & 1) continue;
    CellCoord lo = t, hi = t;
    lo[axis] -= 1;
    hi[axis] += 1;
    out.push_back(lo);
    out.push_back(hi);
  }
  return out;
}

// True iff some cell has both u and v among its Gamma-neighbors. Irreflexive.
inline bool connected(const CellCoord& u, const CellCoord& v, const GridShape& shape) {
  if (!shape.contains(u)) detail::throw_out_of_grid(u, shape);
  if (!shape.contains(v)) detail::throw_out_of_grid(v, shape);
  const CellOrder j = cell_order(u);
  if (u == v || j == 0 || cell_order(v) != j) return false;
  // The common cell is a 6-neighbor of u of order j-1, reached by stepping
  // off one of u's odd axes; v must then be one step away from it.
  for (int axis = 0; axis < 3; ++axis) {
    if (!(u[axis] & 1)) continue;
    for (int dir : {-1, 1}) {
      CellCoord t = u;
      t[axis] += dir;
      if (!shape.contains(t)) continue;
      const int dist = std::abs(v.t1 - t.t1) + std::abs(v.t2 - t.t2) + std::abs(v.t3 - t.t3);
      if (dist == 1) return true;
    }
  }
  return false;
}

}  // namespace topogrid
