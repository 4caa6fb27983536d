#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "grid.hpp"

namespace topogrid {

// Dense 3D array addressed with 1-based coordinates. Axis 1 varies fastest
// in memory.
template <class T>
class Array3 {
 public:
  using value_type = T;

  Array3() = default;
  Array3(std::array<coord_t, 3> extents, T fill = T{})
      : extents_(extents),
        data_(std::size_t(extents[0]) * std::size_t(extents[1]) * std::size_t(extents[2]), fill) {}
  Array3(std::array<coord_t, 3> extents, std::vector<T> data)
      : extents_(extents), data_(std::move(data)) {
    if (data_.size() != std::size_t(extents[0]) * std::size_t(extents[1]) * std::size_t(extents[2]))
      throw std::invalid_argument("Array3: data size does not match extents");
  }

  const std::array<coord_t, 3>& extents() const { return extents_; }
  coord_t extent(int axis) const { return extents_[axis]; }
  std::size_t size() const { return data_.size(); }

  std::size_t stride(int axis) const {
    if (axis == 0) return 1;
    if (axis == 1) return std::size_t(extents_[0]);
    return std::size_t(extents_[0]) * std::size_t(extents_[1]);
  }

  std::size_t index(coord_t a, coord_t b, coord_t c) const {
    return std::size_t(a - 1) + std::size_t(extents_[0]) * (std::size_t(b - 1) + std::size_t(extents_[1]) * std::size_t(c - 1));
  }

  bool contains(coord_t a, coord_t b, coord_t c) const {
    return a >= 1 && b >= 1 && c >= 1 && a <= extents_[0] && b <= extents_[1] && c <= extents_[2];
  }

  T& operator()(coord_t a, coord_t b, coord_t c) { return data_[index(a, b, c)]; }
  const T& operator()(coord_t a, coord_t b, coord_t c) const { return data_[index(a, b, c)]; }

  T& operator[](const CellCoord& t) { return (*this)(t.t1, t.t2, t.t3); }
  const T& operator[](const CellCoord& t) const { return (*this)(t.t1, t.t2, t.t3); }
  T& operator[](const VoxelCoord& r) { return (*this)(r.r1, r.r2, r.r3); }
  const T& operator[](const VoxelCoord& r) const { return (*this)(r.r1, r.r2, r.r3); }

  T& flat(std::size_t i) { return data_[i]; }
  const T& flat(std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  friend bool operator==(const Array3&, const Array3&) = default;

 private:
  std::array<coord_t, 3> extents_{0, 0, 0};
  std::vector<T> data_;
};

}  // namespace topogrid
