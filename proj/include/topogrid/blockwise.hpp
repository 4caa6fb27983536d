#pragma once

// Block-wise labeling.
//
// The volume is cut into blocks that share one voxel layer with each
// face-adjacent neighbor. Each block is labeled on its own with
// extract_full, so local labels restart at 1 in every block. Afterwards:
//
//   1. per-order offsets (prefix sums of local counts in block order) make
//      local labels globally distinct,
//   2. 1- and 2-cells on shared layers union their offset labels,
//   3. at every 0-cell, curves that meet there and bound the same faces are
//      united, after which 0-cell activity is recomputed,
//   4. representatives are compacted to 1..K per order.
//
// The result is isomorphic to running extract_full on the whole volume.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "disjoint_set.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "labeling.hpp"

namespace topogrid {

// Requested block extents in voxels. Extents larger than the volume are
// clamped, which yields a single block along that axis.
class BlockSpec {
 public:
  BlockSpec() = default;
  BlockSpec(const GridShape& volume, std::array<coord_t, 3> block) : volume_(volume) {
    for (int a = 0; a < 3; ++a) {
      const coord_t n = volume.voxels(a);
      if (block[a] < 1 || (n >= 2 && block[a] < 2)) {
        std::ostringstream msg;
        msg << "block extent " << block[a] << " on axis " << a + 1
            << " must be >= 2 (blocks share one voxel layer)";
        throw std::invalid_argument(msg.str());
      }
      block_[a] = std::min(block[a], n);
    }
  }

  const GridShape& volume() const { return volume_; }
  const std::array<coord_t, 3>& block() const { return block_; }

  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;

 private:
  GridShape volume_;
  std::array<coord_t, 3> block_{1, 1, 1};
};

// Inclusive voxel range of one block, plus its position in block order.
struct BlockRange {
  std::size_t index = 0;
  std::array<coord_t, 3> first{1, 1, 1};
  std::array<coord_t, 3> last{1, 1, 1};

  GridShape shape() const {
    return {last[0] - first[0] + 1, last[1] - first[1] + 1, last[2] - first[2] + 1};
  }
  coord_t cell_first(int a) const { return 2 * first[a] - 1; }
  coord_t cell_last(int a) const { return 2 * last[a] - 1; }

  bool contains(const CellCoord& t) const {
    for (int a = 0; a < 3; ++a)
      if (t[a] < cell_first(a) || t[a] > cell_last(a)) return false;
    return true;
  }
  CellCoord to_local(const CellCoord& t) const {
    return {t.t1 - cell_first(0) + 1, t.t2 - cell_first(1) + 1, t.t3 - cell_first(2) + 1};
  }
  CellCoord to_global(const CellCoord& t) const {
    return {t.t1 + cell_first(0) - 1, t.t2 + cell_first(1) - 1, t.t3 + cell_first(2) - 1};
  }

  friend bool operator==(const BlockRange&, const BlockRange&) = default;
};

// The fixed decomposition of a volume into blocks. Blocks are ordered
// lexicographically by starting corner, axis 1 most significant.
class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(const BlockSpec& spec) : spec_(spec) {
    for (int a = 0; a < 3; ++a) {
      const coord_t n = spec.volume().voxels(a);
      const coord_t b = spec.block()[a];
      for (coord_t s = 1;; s += b - 1) {
        const coord_t e = std::min<coord_t>(s + b - 1, n);
        ranges_[a].push_back({s, e});
        if (e == n) break;
      }
    }
  }

  const BlockSpec& spec() const { return spec_; }
  std::size_t size() const { return ranges_[0].size() * ranges_[1].size() * ranges_[2].size(); }
  std::size_t count(int axis) const { return ranges_[axis].size(); }

  std::array<std::size_t, 3> position(std::size_t index) const {
    const std::size_t k3 = index % count(2);
    const std::size_t k2 = (index / count(2)) % count(1);
    const std::size_t k1 = index / (count(2) * count(1));
    return {k1, k2, k3};
  }
  std::size_t index_of(const std::array<std::size_t, 3>& k) const {
    return (k[0] * count(1) + k[1]) * count(2) + k[2];
  }

  BlockRange operator[](std::size_t index) const {
    if (index >= size()) throw bounds_error("block index out of range");
    const auto k = position(index);
    BlockRange r;
    r.index = index;
    for (int a = 0; a < 3; ++a) {
      r.first[a] = ranges_[a][k[a]].first;
      r.last[a] = ranges_[a][k[a]].second;
    }
    return r;
  }

  std::vector<BlockRange> blocks() const {
    std::vector<BlockRange> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i]);
    return out;
  }

  // Smallest block index whose range contains t; this block owns t.
  std::size_t owner(const CellCoord& t) const {
    if (!spec_.volume().contains(t)) detail::throw_out_of_grid(t, spec_.volume());
    std::array<std::size_t, 3> k{};
    for (int a = 0; a < 3; ++a) k[a] = owner_along(a, t[a]);
    return index_of(k);
  }

  // Cells of block `index` that it owns: its own range minus the leading
  // layer it shares with the previous block along each axis.
  std::pair<CellCoord, CellCoord> owned_cells(std::size_t index) const {
    const BlockRange r = (*this)[index];
    const auto k = position(index);
    CellCoord lo, hi;
    for (int a = 0; a < 3; ++a) {
      lo[a] = r.cell_first(a) + (k[a] > 0 ? 1 : 0);
      hi[a] = r.cell_last(a);
    }
    return {lo, hi};
  }

 private:
  std::size_t owner_along(int a, coord_t t) const {
    const std::size_t n = ranges_[a].size();
    if (n == 1) return 0;
    const coord_t w = 2 * (spec_.block()[a] - 1);
    const coord_t k = (t - 1 + w - 1) / w - 1;
    return std::min<std::size_t>(std::size_t(std::max<coord_t>(k, 0)), n - 1);
  }

  BlockSpec spec_;
  std::array<std::vector<std::pair<coord_t, coord_t>>, 3> ranges_;
};

inline std::vector<BlockRange> decompose(const BlockSpec& spec) { return BlockLayout(spec).blocks(); }

// A 0-cell where curves meet inside a block. Kept for every locally active
// 0-cell and for every 0-cell touching two or more distinct curve labels;
// these are the only places where curve merging can change anything.
struct ZeroCellCandidate {
  CellCoord cell;                   // global coordinates
  label_t local_label = 0;          // 0 if inactive within the block
  std::array<label_t, 6> around{};  // local 1-cell labels of Gamma(cell)

  friend bool operator==(const ZeroCellCandidate&, const ZeroCellCandidate&) = default;
};

// Everything about a processed block except its label grid.
struct BlockSummary {
  BlockRange range;
  // Local component counts by order 0..2; entry 3 is the max segment label.
  std::array<label_t, 4> max_labels{};
  std::array<NeighborhoodTable, 3> neighborhoods{NeighborhoodTable(0), NeighborhoodTable(1),
                                                 NeighborhoodTable(2)};
  std::vector<ZeroCellCandidate> zero_candidates;

  friend bool operator==(const BlockSummary&, const BlockSummary&) = default;
};

struct BlockResult {
  BlockSummary info;
  TopologicalLabelMap local_tau;
};

inline SegmentLabelMap crop(const SegmentLabelMap& sigma, const BlockRange& range) {
  const GridShape shape = range.shape();
  std::vector<label_t> labels;
  labels.reserve(shape.voxel_count());
  for (coord_t r3 = range.first[2]; r3 <= range.last[2]; ++r3)
    for (coord_t r2 = range.first[1]; r2 <= range.last[1]; ++r2)
      for (coord_t r1 = range.first[0]; r1 <= range.last[0]; ++r1)
        labels.push_back(sigma.voxels()(r1, r2, r3));
  return SegmentLabelMap(shape, std::move(labels));
}

// Labels one block in isolation. `sub` holds the block's voxels only.
inline BlockResult process_block(const SegmentLabelMap& sub, const BlockRange& range) {
  if (!(sub.shape() == range.shape())) throw std::invalid_argument("block voxels do not match block range");
  Extraction ex = extract_full(sub);
  BlockResult out;
  out.info.range = range;
  out.info.max_labels = {ex.counts[0], ex.counts[1], ex.counts[2], ex.max_segment};
  out.info.neighborhoods = std::move(ex.tables);

  const auto& cells = ex.tau.cells();
  detail::for_each_cell_of_order(cells.extents(), 0, [&](const CellCoord& t) {
    ZeroCellCandidate cand;
    std::size_t n = 0;
    const std::size_t base = cells.index(t.t1, t.t2, t.t3);
    for (int a = 0; a < 3; ++a) {
      cand.around[n++] = cells.flat(base - cells.stride(a));
      cand.around[n++] = cells.flat(base + cells.stride(a));
    }
    cand.local_label = cells[t];
    if (cand.local_label == 0) {
      std::array<label_t, 6> s = cand.around;
      std::sort(s.begin(), s.end());
      const auto distinct = std::unique(s.begin(), s.end()) - s.begin() - (s[0] == 0 ? 1 : 0);
      if (distinct < 2) return;
    }
    cand.cell = range.to_global(t);
    out.info.zero_candidates.push_back(cand);
  });
  out.local_tau = std::move(ex.tau);
  return out;
}

inline BlockResult process_block(const SegmentLabelMap& sigma, const BlockLayout& layout, std::size_t index) {
  const BlockRange range = layout[index];
  return process_block(crop(sigma, range), range);
}

// Per-block, per-order (0..2) label offsets and the totals M0, M1, M2.
struct OffsetTable {
  std::vector<std::array<label_t, 3>> offsets;
  std::array<label_t, 3> totals{};

  label_t at(std::size_t block, CellOrder order) const { return offsets.at(block)[order]; }

  friend bool operator==(const OffsetTable&, const OffsetTable&) = default;
};

inline OffsetTable compute_offsets(std::span<const std::array<label_t, 4>> max_labels) {
  OffsetTable out;
  std::array<std::uint64_t, 3> sum{};
  out.offsets.reserve(max_labels.size());
  for (const auto& m : max_labels) {
    out.offsets.push_back({label_t(sum[0]), label_t(sum[1]), label_t(sum[2])});
    for (int c = 0; c < 3; ++c) {
      sum[c] += m[c];
      if (sum[c] > std::numeric_limits<label_t>::max()) {
        std::ostringstream msg;
        msg << "total of " << c << "-component labels exceeds 32 bits (at least " << sum[c]
            << " required)";
        throw label_overflow_error(msg.str());
      }
    }
  }
  for (int c = 0; c < 3; ++c) out.totals[c] = label_t(sum[c]);
  return out;
}

inline OffsetTable compute_offsets(std::span<const BlockSummary> blocks) {
  std::vector<std::array<label_t, 4>> m;
  m.reserve(blocks.size());
  for (const auto& b : blocks) m.push_back(b.max_labels);
  return compute_offsets(std::span<const std::array<label_t, 4>>(m));
}

struct Forests {
  DisjointSet curves;  // 1-cells, labels 1..M1
  DisjointSet faces;   // 2-cells, labels 1..M2
};

namespace detail {

[[noreturn]] inline void throw_disagreement(const CellCoord& t, std::size_t a, std::size_t b,
                                            const char* what) {
  std::ostringstream msg;
  msg << "blocks " << a << " and " << b << " disagree on " << what << " of cell " << t;
  throw consistency_error(msg.str());
}

}  // namespace detail

// Unions the offset labels of 1- and 2-cells on every layer shared by two
// face-adjacent blocks. `repo.load_tau(i)` must return block i's label grid.
template <class Repository>
Forests reconcile(const BlockLayout& layout, const OffsetTable& offsets, const Repository& repo) {
  Forests f{DisjointSet(offsets.totals[1]), DisjointSet(offsets.totals[2])};
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto k = layout.position(i);
    const BlockRange ra = layout[i];
    const auto& ta = repo.load_tau(i);
    for (int a = 0; a < 3; ++a) {
      if (k[a] + 1 >= layout.count(a)) continue;
      auto kb = k;
      ++kb[a];
      const std::size_t j = layout.index_of(kb);
      const BlockRange rb = layout[j];
      const auto& tb = repo.load_tau(j);
      CellCoord lo, hi;
      for (int d = 0; d < 3; ++d) {
        lo[d] = ra.cell_first(d);
        hi[d] = ra.cell_last(d);
      }
      lo[a] = hi[a] = ra.cell_last(a);
      for (coord_t t3 = lo.t3; t3 <= hi.t3; ++t3)
        for (coord_t t2 = lo.t2; t2 <= hi.t2; ++t2)
          for (coord_t t1 = lo.t1; t1 <= hi.t1; ++t1) {
            const CellCoord t{t1, t2, t3};
            const label_t la = ta[ra.to_local(t)];
            const label_t lb = tb[rb.to_local(t)];
            const CellOrder c = cell_order(t);
            if (c == 3) {
              if (la != lb) detail::throw_disagreement(t, i, j, "the segment label");
              continue;
            }
            if ((la == 0) != (lb == 0)) detail::throw_disagreement(t, i, j, "the activity");
            if (la == 0) continue;
            DisjointSet& ds = c == 2 ? f.faces : f.curves;
            ds.unite(offsets.at(i, c) + la, offsets.at(j, c) + lb);
          }
    }
  }
  return f;
}

struct CurveMergeResult {
  // Indexed by offset 0-label minus one: whether the 0-cell stays active.
  std::vector<std::uint8_t> active;
  std::size_t unions = 0;
  std::size_t sweeps = 0;
};

namespace detail {

// Bounded faces of a local curve label, as global face representatives.
struct FaceSet {
  std::array<label_t, 4> labels{};
  std::size_t size = 0;
  friend bool operator==(const FaceSet& a, const FaceSet& b) {
    return a.size == b.size && std::equal(a.labels.begin(), a.labels.begin() + a.size, b.labels.begin());
  }
};

inline FaceSet bounded_faces(const BlockSummary& block, label_t face_offset, label_t local_curve,
                             DisjointSet& faces) {
  FaceSet s;
  for (label_t x : block.neighborhoods[1].row(local_curve))
    if (x != 0) s.labels[s.size++] = faces.find(face_offset + x);
  std::sort(s.labels.begin(), s.labels.begin() + s.size);
  s.size = std::size_t(std::unique(s.labels.begin(), s.labels.begin() + s.size) - s.labels.begin());
  return s;
}

inline bool has_singleton(std::array<label_t, 6> x) {
  std::sort(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size();) {
    std::size_t j = i + 1;
    while (j < x.size() && x[j] == x[i]) ++j;
    if (j - i == 1 && x[i] != 0) return true;
    i = j;
  }
  return false;
}

}  // namespace detail

// Unites curves that meet at a 0-cell and bound the same faces, repeating
// until a full sweep makes no change, then recomputes 0-cell activity from
// the merged curve labels. With `merge` false only the activity of each
// 0-cell within its own block is reported.
inline CurveMergeResult merge_curves(std::span<const BlockSummary> blocks, const OffsetTable& offsets,
                                     Forests& forests, bool merge = true) {
  CurveMergeResult out;
  out.active.assign(offsets.totals[0], 0);
  if (!merge) {
    for (std::size_t b = 0; b < blocks.size(); ++b)
      for (const auto& cand : blocks[b].zero_candidates)
        if (cand.local_label != 0) out.active[offsets.at(b, 0) + cand.local_label - 1] = 1;
    return out;
  }

  bool changed = true;
  while (changed) {
    changed = false;
    ++out.sweeps;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const label_t off1 = offsets.at(b, 1);
      const label_t off2 = offsets.at(b, 2);
      for (const auto& cand : blocks[b].zero_candidates) {
        std::array<label_t, 6> local = cand.around;
        std::sort(local.begin(), local.end());
        const auto end = std::unique(local.begin(), local.end());
        auto begin = local.begin();
        if (*begin == 0) ++begin;
        for (auto p = begin; p != end; ++p)
          for (auto q = p + 1; q != end; ++q) {
            if (forests.curves.same(off1 + *p, off1 + *q)) continue;
            if (detail::bounded_faces(blocks[b], off2, *p, forests.faces) ==
                detail::bounded_faces(blocks[b], off2, *q, forests.faces)) {
              forests.curves.unite(off1 + *p, off1 + *q);
              ++out.unions;
              changed = true;
            }
          }
      }
    }
  }

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const label_t off1 = offsets.at(b, 1);
    for (const auto& cand : blocks[b].zero_candidates) {
      std::array<label_t, 6> mapped{};
      for (std::size_t i = 0; i < 6; ++i)
        mapped[i] = cand.around[i] == 0 ? 0 : forests.curves.find(off1 + cand.around[i]);
      const bool active = detail::has_singleton(mapped);
      if (cand.local_label == 0) {
        // A 0-cell inactive within its block can never become active.
        if (active) detail::throw_disagreement(cand.cell, b, b, "0-cell activity after merging");
        continue;
      }
      out.active[offsets.at(b, 0) + cand.local_label - 1] = active ? 1 : 0;
    }
  }
  return out;
}

// Final global labels: offset label -> compact label 1..K per order.
struct GlobalLabeling {
  OffsetTable offsets;
  // Indexed by order 0..2 and offset label minus one. For order 0, entries
  // of 0-cells deactivated by curve merging are 0.
  std::array<std::vector<label_t>, 3> relabeling;
  std::array<NeighborhoodTable, 3> tables{NeighborhoodTable(0), NeighborhoodTable(1), NeighborhoodTable(2)};
  // Global component counts K0, K1, K2 and the max segment label.
  std::array<label_t, 4> counts{};

  label_t global_label(std::size_t block, CellOrder order, label_t local) const {
    if (local == 0 || order == 3) return local;
    return relabeling[order][offsets.at(block, order) + local - 1];
  }

  friend bool operator==(const GlobalLabeling&, const GlobalLabeling&) = default;
};

namespace detail {

inline std::vector<label_t> compact(DisjointSet& ds, label_t& count) {
  std::vector<label_t> root_label(std::size_t(ds.size()) + 1, 0);
  std::vector<label_t> out(ds.size());
  count = 0;
  for (label_t g = 1; g <= ds.size(); ++g) {
    label_t& r = root_label[ds.find(g)];
    if (r == 0) r = ++count;
    out[g - 1] = r;
  }
  return out;
}

// Fills row `label` of a table being assembled, or checks it against an
// earlier representative of the same component.
inline void put_row(std::vector<label_t>& entries, std::vector<std::uint8_t>& filled, std::size_t width,
                    label_t label, std::span<const label_t> row, CellOrder order) {
  label_t* dst = entries.data() + (label - 1) * width;
  if (!filled[label - 1]) {
    std::copy(row.begin(), row.end(), dst);
    filled[label - 1] = 1;
  } else if (!std::equal(row.begin(), row.end(), dst)) {
    std::ostringstream msg;
    msg << "fragments of " << order << "-component " << label << " bound different components";
    throw consistency_error(msg.str());
  }
}

}  // namespace detail

inline GlobalLabeling finalize(std::span<const BlockSummary> blocks, const OffsetTable& offsets,
                               Forests& forests, const CurveMergeResult& merged) {
  GlobalLabeling out;
  out.offsets = offsets;
  out.relabeling[2] = detail::compact(forests.faces, out.counts[2]);
  out.relabeling[1] = detail::compact(forests.curves, out.counts[1]);
  out.relabeling[0].assign(offsets.totals[0], 0);
  for (label_t g = 0; g < offsets.totals[0]; ++g)
    if (merged.active[g]) out.relabeling[0][g] = ++out.counts[0];
  for (const auto& b : blocks) out.counts[3] = std::max(out.counts[3], b.max_labels[3]);

  std::array<std::vector<label_t>, 3> entries;
  std::array<std::vector<std::uint8_t>, 3> filled;
  for (int c = 0; c < 3; ++c) {
    entries[c].assign(std::size_t(out.counts[c]) * (6 - 2 * c), 0);
    filled[c].assign(out.counts[c], 0);
  }

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& blk = blocks[b];
    for (label_t l = 1; l <= blk.max_labels[2]; ++l)
      detail::put_row(entries[2], filled[2], 2, out.global_label(b, 2, l), blk.neighborhoods[2].row(l), 2);

    for (label_t l = 1; l <= blk.max_labels[1]; ++l) {
      std::array<label_t, 4> row{};
      std::size_t n = 0;
      for (label_t x : blk.neighborhoods[1].row(l))
        if (x != 0) row[n++] = out.global_label(b, 2, x);
      std::sort(row.begin(), row.begin() + n);
      n = std::size_t(std::unique(row.begin(), row.begin() + n) - row.begin());
      std::fill(row.begin() + n, row.end(), 0);
      detail::put_row(entries[1], filled[1], 4, out.global_label(b, 1, l), row, 1);
    }

    for (const auto& cand : blk.zero_candidates) {
      const label_t q = out.global_label(b, 0, cand.local_label);
      if (q == 0) continue;
      std::array<label_t, 6> mapped{};
      for (std::size_t i = 0; i < 6; ++i) mapped[i] = out.global_label(b, 1, cand.around[i]);
      detail::put_row(entries[0], filled[0], 6, q, once(mapped).view(), 0);
    }
  }
  for (int c = 0; c < 3; ++c) out.tables[c] = NeighborhoodTable(c, std::move(entries[c]));
  return out;
}

// In-memory block repository.
class MemoryBlockStore {
 public:
  void prepare(const BlockLayout& layout) {
    std::lock_guard lock(mutex_);
    taus_.assign(layout.size(), std::nullopt);
  }

  void write_block(const BlockResult& result) {
    std::lock_guard lock(mutex_);
    auto& slot = taus_.at(result.info.range.index);
    if (slot) throw store_error("block " + std::to_string(result.info.range.index) + " written twice");
    slot = result.local_tau;
  }

  const TopologicalLabelMap& load_tau(std::size_t index) const {
    const auto& slot = taus_.at(index);
    if (!slot) throw state_error("block " + std::to_string(index) + " has not been written");
    return *slot;
  }

  void finalize(const BlockLayout&, const GlobalLabeling&) {}

 private:
  std::mutex mutex_;
  std::vector<std::optional<TopologicalLabelMap>> taus_;
};

struct PipelineOptions {
  unsigned workers = 1;
  // Disabling curve merging leaves falsely split curves and falsely active
  // 0-cells in the output. Only useful for demonstrating that failure.
  bool merge_curves = true;
};

struct PipelineTimings {
  double blocks = 0, offsets = 0, reconcile = 0, merge = 0, finalize = 0;
  double total() const { return blocks + offsets + reconcile + merge + finalize; }
};

struct PipelineResult {
  BlockLayout layout;
  std::vector<BlockSummary> blocks;
  GlobalLabeling labeling;
  CurveMergeResult merge;
  PipelineTimings timings;
};

namespace detail {

inline SegmentLabelMap read_block(const SegmentLabelMap& sigma, const BlockRange& range) {
  return crop(sigma, range);
}

template <class Source>
  requires(!std::is_same_v<Source, SegmentLabelMap>)
SegmentLabelMap read_block(const Source& source, const BlockRange& range) {
  return source.read_block(range);
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace detail

// Runs the whole block-wise pipeline. `source` is a SegmentLabelMap or any
// type with shape() and read_block(BlockRange). `repo` receives every
// block before reconciliation starts and the final labeling at the end.
// The output does not depend on the worker count.
template <class Source, class Repository>
PipelineResult extract_blockwise(const Source& source, const BlockSpec& spec, Repository& repo,
                                 const PipelineOptions& options = {}) {
  if (!(source.shape() == spec.volume())) throw std::invalid_argument("block spec does not match volume shape");
  PipelineResult out;
  out.layout = BlockLayout(spec);
  const std::size_t n = out.layout.size();
  repo.prepare(out.layout);
  out.blocks.resize(n);

  auto start = std::chrono::steady_clock::now();
  {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::optional<std::pair<std::size_t, std::string>> error;
    auto work = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          const BlockRange range = out.layout[i];
          BlockResult res = process_block(detail::read_block(source, range), range);
          repo.write_block(res);
          out.blocks[i] = std::move(res.info);
        } catch (const std::exception& e) {
          std::lock_guard lock(error_mutex);
          if (!error || error->first > i) error = {i, e.what()};
          failed = true;
        }
      }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, unsigned(n)));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (error) {
      std::ostringstream msg;
      msg << "block " << error->first << " failed: " << error->second;
      throw std::runtime_error(msg.str());
    }
  }
  out.timings.blocks = detail::seconds_since(start);

  start = std::chrono::steady_clock::now();
  const OffsetTable offsets = compute_offsets(std::span<const BlockSummary>(out.blocks));
  out.timings.offsets = detail::seconds_since(start);

  start = std::chrono::steady_clock::now();
  Forests forests = reconcile(out.layout, offsets, repo);
  out.timings.reconcile = detail::seconds_since(start);

  start = std::chrono::steady_clock::now();
  out.merge = merge_curves(out.blocks, offsets, forests, options.merge_curves);
  out.timings.merge = detail::seconds_since(start);

  start = std::chrono::steady_clock::now();
  out.labeling = finalize(out.blocks, offsets, forests, out.merge);
  repo.finalize(out.layout, out.labeling);
  out.timings.finalize = detail::seconds_since(start);
  return out;
}

// Global topological label map of a finished pipeline run. Cells on shared
// layers are checked to receive the same label from every block.
template <class Repository>
TopologicalLabelMap assemble(const BlockLayout& layout, const GlobalLabeling& labeling, const Repository& repo) {
  const GridShape& shape = layout.spec().volume();
  TopologicalLabelMap tau(shape);
  std::vector<std::uint8_t> written(shape.cell_count(), 0);
  for (std::size_t b = 0; b < layout.size(); ++b) {
    const BlockRange r = layout[b];
    const auto& local = repo.load_tau(b);
    const auto ext = local.cells().extents();
    for (coord_t t3 = 1; t3 <= ext[2]; ++t3)
      for (coord_t t2 = 1; t2 <= ext[1]; ++t2)
        for (coord_t t1 = 1; t1 <= ext[0]; ++t1) {
          const CellCoord lt{t1, t2, t3};
          const CellCoord gt = r.to_global(lt);
          const label_t l = labeling.global_label(b, cell_order(lt), local[lt]);
          const std::size_t idx = tau.cells().index(gt.t1, gt.t2, gt.t3);
          if (written[idx] && tau.cells().flat(idx) != l) detail::throw_disagreement(gt, b, b, "the final label");
          written[idx] = 1;
          tau.cells().flat(idx) = l;
        }
  }
  return tau;
}

struct BlockwiseLabeling {
  TopologicalLabelMap tau;
  PipelineResult pipeline;
};

// Block-wise extraction held entirely in memory.
inline BlockwiseLabeling blockwise_labeling(const SegmentLabelMap& sigma, const BlockSpec& spec,
                                            const PipelineOptions& options = {}) {
  MemoryBlockStore repo;
  BlockwiseLabeling out;
  out.pipeline = extract_blockwise(sigma, spec, repo, options);
  out.tau = assemble(out.pipeline.layout, out.pipeline.labeling, repo);
  return out;
}

}  // namespace topogrid
