#pragma once

// Whole-grid labeling of segments, faces, curves and points.
//
// Labeling proceeds by cell order: 3-cells copy the segment labels, then
// 2-cells and 1-cells are flood-filled into components, then active 0-cells
// are numbered individually. A c-cell's signature is once() applied to the
// labels of its Gamma-neighbors; the cell is active iff the signature is
// non-empty, and two connected c-cells belong to the same component iff
// their signatures are equal.

#include <algorithm>
#include <array>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "array3.hpp"
#include "errors.hpp"
#include "grid.hpp"

namespace topogrid {

// Dense map from voxels to segment labels. Label 0 is reserved for inactive
// cells on the topological grid, so every voxel carries a label >= 1.
class SegmentLabelMap {
 public:
  SegmentLabelMap() = default;
  explicit SegmentLabelMap(const GridShape& shape, label_t fill = 1)
      : shape_(shape), labels_(shape.voxel_extents(), fill) {
    if (fill == 0) throw std::invalid_argument("segment labels must be >= 1");
  }
  SegmentLabelMap(const GridShape& shape, std::vector<label_t> labels)
      : shape_(shape), labels_(shape.voxel_extents(), std::move(labels)) {
    for (label_t l : labels_.values())
      if (l == 0) throw std::invalid_argument("segment labels must be >= 1");
  }

  const GridShape& shape() const { return shape_; }

  label_t operator[](const VoxelCoord& r) const { return labels_[r]; }
  label_t at(const VoxelCoord& r) const {
    if (!shape_.contains(r)) detail::throw_out_of_grid(r, shape_);
    return labels_[r];
  }
  void set(const VoxelCoord& r, label_t label) {
    if (!shape_.contains(r)) detail::throw_out_of_grid(r, shape_);
    if (label == 0) throw std::invalid_argument("segment labels must be >= 1");
    labels_[r] = label;
  }

  const Array3<label_t>& voxels() const { return labels_; }

  friend bool operator==(const SegmentLabelMap&, const SegmentLabelMap&) = default;

 private:
  GridShape shape_;
  Array3<label_t> labels_;
};

// Labels on the topological grid. 0 marks inactive cells; label numerals
// are independent per cell order.
class TopologicalLabelMap {
 public:
  TopologicalLabelMap() = default;
  explicit TopologicalLabelMap(const GridShape& shape)
      : shape_(shape), cells_(shape.cell_extents(), 0) {}
  TopologicalLabelMap(const GridShape& shape, std::vector<label_t> labels)
      : shape_(shape), cells_(shape.cell_extents(), std::move(labels)) {}

  const GridShape& shape() const { return shape_; }

  label_t operator[](const CellCoord& t) const { return cells_[t]; }
  label_t& operator[](const CellCoord& t) { return cells_[t]; }
  label_t at(const CellCoord& t) const {
    if (!shape_.contains(t)) detail::throw_out_of_grid(t, shape_);
    return cells_[t];
  }

  const Array3<label_t>& cells() const { return cells_; }
  Array3<label_t>& cells() { return cells_; }

  friend bool operator==(const TopologicalLabelMap&, const TopologicalLabelMap&) = default;

 private:
  GridShape shape_;
  Array3<label_t> cells_;
};

// Output of once(): the labels occurring exactly once, ascending, padded
// with zeros to the input width.
struct Signature {
  std::array<label_t, 6> entries{};
  std::uint8_t width = 0;

  bool active() const { return width > 0 && entries[0] != 0; }
  std::span<const label_t> view() const { return {entries.data(), width}; }
  // Entries without the zero padding.
  std::span<const label_t> labels() const {
    std::size_t k = 0;
    while (k < width && entries[k] != 0) ++k;
    return {entries.data(), k};
  }

  friend bool operator==(const Signature&, const Signature&) = default;
};

inline Signature once(std::span<const label_t> x) {
  if (x.size() > 6) throw std::invalid_argument("once: at most six labels");
  Signature out;
  out.width = static_cast<std::uint8_t>(x.size());
  std::array<label_t, 6> sorted{};
  std::copy(x.begin(), x.end(), sorted.begin());
  std::sort(sorted.begin(), sorted.begin() + x.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < x.size();) {
    std::size_t j = i + 1;
    while (j < x.size() && sorted[j] == sorted[i]) ++j;
    if (j - i == 1 && sorted[i] > 0) out.entries[k++] = sorted[i];
    i = j;
  }
  return out;
}

// One row per c-component, holding the (c+1)-components it bounds.
class NeighborhoodTable {
 public:
  NeighborhoodTable() = default;
  explicit NeighborhoodTable(CellOrder order) : order_(order) {
    if (order < 0 || order > 2) throw std::invalid_argument("neighborhood order must be 0, 1 or 2");
  }
  NeighborhoodTable(CellOrder order, std::vector<label_t> entries)
      : NeighborhoodTable(order) {
    if (entries.size() % width() != 0)
      throw std::invalid_argument("neighborhood entries are not a whole number of rows");
    entries_ = std::move(entries);
  }

  CellOrder order() const { return order_; }
  std::size_t width() const { return std::size_t(6 - 2 * order_); }
  std::size_t rows() const { return entries_.size() / width(); }

  // Row of component `label` (1-based).
  std::span<const label_t> row(label_t label) const {
    if (label == 0 || label > rows()) {
      std::ostringstream msg;
      msg << "no " << order_ << "-component with label " << label;
      throw not_found_error(msg.str());
    }
    return {entries_.data() + (label - 1) * width(), width()};
  }

  void append(std::span<const label_t> row) {
    if (row.size() != width()) throw std::invalid_argument("neighborhood row has wrong width");
    entries_.insert(entries_.end(), row.begin(), row.end());
  }

  std::span<const label_t> entries() const { return entries_; }

  friend bool operator==(const NeighborhoodTable&, const NeighborhoodTable&) = default;

 private:
  CellOrder order_ = 0;
  std::vector<label_t> entries_;
};

struct LabelingStep {
  label_t count = 0;
  NeighborhoodTable table;
};

namespace detail {

// Labels of Gamma(t), canonical order. Assumes t is a valid cell of order < 3.
inline Signature signature_at(const Array3<label_t>& cells, const CellCoord& t) {
  std::array<label_t, 6> x{};
  std::size_t n = 0;
  const std::size_t base = cells.index(t.t1, t.t2, t.t3);
  for (int axis = 0; axis < 3; ++axis) {
    if (t[axis] & 1) continue;
    const std::size_t s = cells.stride(axis);
    x[n++] = cells.flat(base - s);
    x[n++] = cells.flat(base + s);
  }
  return once({x.data(), n});
}

// Visits every cell of the given order, axis 1 fastest.
template <class F>
void for_each_cell_of_order(const std::array<coord_t, 3>& ext, CellOrder order, F&& f) {
  for (coord_t t3 = 1; t3 <= ext[2]; ++t3) {
    for (coord_t t2 = 1; t2 <= ext[1]; ++t2) {
      const int odd1 = order - (t3 & 1) - (t2 & 1);
      if (odd1 < 0 || odd1 > 1) continue;
      for (coord_t t1 = odd1 ? 1 : 2; t1 <= ext[0]; t1 += 2) f(CellCoord{t1, t2, t3});
    }
  }
}

// Visits every cell connected to u (u must have order >= 1).
template <class F>
void for_each_connected(const std::array<coord_t, 3>& ext, const CellCoord& u, F&& f) {
  for (int a = 0; a < 3; ++a) {
    if (!(u[a] & 1)) continue;
    for (int dir : {-1, 1}) {
      CellCoord t = u;
      t[a] += dir;
      if (t[a] < 1 || t[a] > ext[a]) continue;
      for (int b = 0; b < 3; ++b) {
        if (t[b] & 1) continue;
        for (int d : {-1, 1}) {
          CellCoord v = t;
          v[b] += d;
          if (v != u) f(v);
        }
      }
    }
  }
}

[[noreturn]] inline void throw_label_overflow(CellOrder order) {
  std::ostringstream msg;
  msg << "more than " << std::numeric_limits<label_t>::max() << ' ' << order
      << "-components; labels need more than 32 bits";
  throw label_overflow_error(msg.str());
}

}  // namespace detail

// Copies segment labels onto the 3-cells; all other cells become 0.
// Returns the map and the maximum segment label.
inline std::pair<TopologicalLabelMap, label_t> label_3cells(const SegmentLabelMap& sigma) {
  TopologicalLabelMap tau(sigma.shape());
  label_t max_label = 0;
  const auto& ext = sigma.shape().voxel_extents();
  for (coord_t r3 = 1; r3 <= ext[2]; ++r3)
    for (coord_t r2 = 1; r2 <= ext[1]; ++r2)
      for (coord_t r1 = 1; r1 <= ext[0]; ++r1) {
        const label_t l = sigma.voxels()(r1, r2, r3);
        tau.cells()(2 * r1 - 1, 2 * r2 - 1, 2 * r3 - 1) = l;
        max_label = std::max(max_label, l);
      }
  return {std::move(tau), max_label};
}

inline Signature signature(const CellCoord& t, const TopologicalLabelMap& tau) {
  if (!tau.shape().contains(t)) detail::throw_out_of_grid(t, tau.shape());
  if (cell_order(t) == 3) throw std::invalid_argument("3-cells have no signature");
  return detail::signature_at(tau.cells(), t);
}

// Flood-fills the active c-cells (c = 2 or 1) into components. The
// (c+1)-cell labels must be final.
inline LabelingStep label_components(TopologicalLabelMap& tau, CellOrder c) {
  if (c != 1 && c != 2) throw std::invalid_argument("label_components: order must be 1 or 2");
  auto& cells = tau.cells();
  const auto ext = cells.extents();
  LabelingStep out{0, NeighborhoodTable(c)};
  std::vector<CellCoord> stack;

  detail::for_each_cell_of_order(ext, c, [&](const CellCoord& seed) {
    if (cells[seed] != 0) return;
    const Signature sig = detail::signature_at(cells, seed);
    if (!sig.active()) return;
    if (out.count == std::numeric_limits<label_t>::max()) detail::throw_label_overflow(c);
    const label_t n = ++out.count;
    out.table.append(sig.view());
    cells[seed] = n;
    stack.push_back(seed);
    while (!stack.empty()) {
      const CellCoord u = stack.back();
      stack.pop_back();
      detail::for_each_connected(ext, u, [&](const CellCoord& v) {
        if (cells[v] != 0) return;
        if (detail::signature_at(cells, v) == sig) {
          cells[v] = n;
          stack.push_back(v);
        }
      });
    }
  });
  return out;
}

// Numbers every active 0-cell; each is its own component.
inline LabelingStep label_0cells(TopologicalLabelMap& tau) {
  auto& cells = tau.cells();
  LabelingStep out{0, NeighborhoodTable(0)};
  detail::for_each_cell_of_order(cells.extents(), 0, [&](const CellCoord& t) {
    const Signature sig = detail::signature_at(cells, t);
    if (!sig.active()) return;
    if (out.count == std::numeric_limits<label_t>::max()) detail::throw_label_overflow(0);
    out.table.append(sig.view());
    cells[t] = ++out.count;
  });
  return out;
}

struct Extraction {
  TopologicalLabelMap tau;
  label_t max_segment = 0;
  // Component counts and neighborhood tables, indexed by cell order 0..2.
  std::array<label_t, 3> counts{};
  std::array<NeighborhoodTable, 3> tables{NeighborhoodTable(0), NeighborhoodTable(1),
                                          NeighborhoodTable(2)};
};

inline Extraction extract_full(const SegmentLabelMap& sigma) {
  Extraction out;
  std::tie(out.tau, out.max_segment) = label_3cells(sigma);
  for (CellOrder c : {2, 1}) {
    auto step = label_components(out.tau, c);
    out.counts[c] = step.count;
    out.tables[c] = std::move(step.table);
  }
  auto zero = label_0cells(out.tau);
  out.counts[0] = zero.count;
  out.tables[0] = std::move(zero.table);
  return out;
}

// Diagnostic: segment labels whose voxels are not 6-connected. Labeling
// treats such a label as one 3-component regardless.
inline std::vector<label_t> find_disconnected_segments(const SegmentLabelMap& sigma) {
  const auto& vox = sigma.voxels();
  const auto ext = vox.extents();
  std::vector<bool> seen(vox.size(), false);
  std::vector<label_t> first_seen, repeated;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < vox.size(); ++i) {
    if (seen[i]) continue;
    const label_t l = vox.flat(i);
    first_seen.push_back(l);
    seen[i] = true;
    stack.push_back(i);
    while (!stack.empty()) {
      const std::size_t k = stack.back();
      stack.pop_back();
      const coord_t r1 = coord_t(k % std::size_t(ext[0]));
      const coord_t r2 = coord_t((k / std::size_t(ext[0])) % std::size_t(ext[1]));
      const coord_t r3 = coord_t(k / (std::size_t(ext[0]) * std::size_t(ext[1])));
      const std::array<coord_t, 3> r{r1, r2, r3};
      for (int a = 0; a < 3; ++a) {
        for (int d : {-1, 1}) {
          const coord_t q = r[a] + d;
          if (q < 0 || q >= ext[a]) continue;
          const std::size_t nb = d < 0 ? k - vox.stride(a) : k + vox.stride(a);
          if (!seen[nb] && vox.flat(nb) == l) {
            seen[nb] = true;
            stack.push_back(nb);
          }
        }
      }
    }
  }
  std::sort(first_seen.begin(), first_seen.end());
  for (std::size_t i = 1; i < first_seen.size(); ++i)
    if (first_seen[i] == first_seen[i - 1] && (repeated.empty() || repeated.back() != first_seen[i]))
      repeated.push_back(first_seen[i]);
  return repeated;
}

}  // namespace topogrid
