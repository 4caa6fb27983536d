#pragma once

// On-disk stores for block-wise extraction results.
//
// GridStore (one directory):
//   manifest.txt
//   blocks/<b>/topological-grid.arr      local labels of block b (rank 3)
//   blocks/<b>/max-labels.arr            local counts, orders 0..2, max segment
//   blocks/<b>/label-offsets.arr         offsets, orders 0..2
//   blocks/<b>/neighborhood-{0,1,2}.arr  local bounding tables
//   blocks/<b>/zero-cell-candidates.arr  rows t1 t2 t3 label n1..n6
//   relabeling-{1,2}.arr                 offset label -> global label
//   zero-cell-activity.arr               offset 0-label -> global label or 0
//   neighborhood-{0,1,2}.arr             global bounding tables
//
// GeometryStore (one directory):
//   manifest.txt
//   0-cells.arr                          row q-1 holds active 0-cell q
//   {1,2,3}-components/bin-<q mod bins>/<q>-<p>.arr   fragment p of component q
//   parts-counters-{1,2,3}.arr           fragments per component

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "array_file.hpp"
#include "blockwise.hpp"
#include "errors.hpp"

namespace topogrid {

// Ordered key=value text file. Values are kept as strings.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_)
      if (k == key) {
        v = value;
        return;
      }
    entries_.emplace_back(key, value);
  }
  template <class Range>
  void set_list(const std::string& key, const Range& values) {
    std::ostringstream os;
    bool first = true;
    for (auto v : values) {
      if (!first) os << ' ';
      os << v;
      first = false;
    }
    set(key, os.str());
  }

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : entries_)
      if (k == key) return v;
    throw store_error("manifest has no key '" + key + "'");
  }
  std::vector<std::uint64_t> get_list(const std::string& key) const {
    std::istringstream is(get(key));
    std::vector<std::uint64_t> out;
    std::uint64_t v;
    while (is >> v) out.push_back(v);
    if (!is.eof()) throw store_error("manifest key '" + key + "' is not a list of integers");
    return out;
  }

  void write(const fs::path& path) const {
    const fs::path tmp = fs::path(path).concat(".tmp");
    {
      std::ofstream out(tmp, std::ios::trunc);
      if (!out) detail::throw_io(tmp, "cannot create");
      for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
      if (!out) detail::throw_io(tmp, "write failed");
    }
    fs::rename(tmp, path);
  }

  static Manifest read(const fs::path& path) {
    std::ifstream in(path);
    if (!in) detail::throw_io(path, "cannot open");
    Manifest m;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) detail::throw_io(path, "malformed line '" + line + "'");
      m.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return m;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

struct CellLabel {
  CellOrder order = 0;
  label_t label = 0;
  friend bool operator==(const CellLabel&, const CellLabel&) = default;
};

namespace detail {

inline constexpr int kStoreVersion = 1;

template <std::size_t N>
std::array<label_t, N> to_labels(const std::vector<std::uint64_t>& v, const fs::path& path, const char* key) {
  if (v.size() != N) throw_io(path, std::string("bad entry count for ") + key);
  std::array<label_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = label_t(v[i]);
  return out;
}

inline void prepare_root(const fs::path& root, bool force) {
  std::error_code ec;
  if (fs::exists(root, ec)) {
    if (!fs::is_directory(root) || !fs::is_empty(root)) {
      if (!force) throw_io(root, "already exists (pass force to overwrite)");
      fs::remove_all(root);
    }
  }
  fs::create_directories(root);
}

inline void write_table(const fs::path& path, const NeighborhoodTable& t) {
  write_array(path, std::span<const label_t>(t.entries()), {std::uint64_t(t.width()), std::uint64_t(t.rows())});
}

inline NeighborhoodTable read_table(const fs::path& path, CellOrder order) {
  std::vector<std::uint64_t> ext;
  auto entries = read_array<label_t>(path, &ext);
  if (ext.size() != 2 || ext[0] != std::uint64_t(6 - 2 * order)) throw_io(path, "bad neighborhood table shape");
  return NeighborhoodTable(order, std::move(entries));
}

}  // namespace detail

// Block results, offsets and global relabelings of one extraction run.
// Blocks may be written concurrently; once finalized, all reads are safe
// from any number of threads.
class GridStore {
 public:
  static GridStore create(const fs::path& root, const BlockSpec& spec, bool force = false) {
    detail::prepare_root(root, force);
    fs::create_directories(root / "blocks");
    GridStore s;
    s.root_ = root;
    s.layout_ = BlockLayout(spec);
    s.write_manifest("blocks");
    return s;
  }

  static GridStore open(const fs::path& root) {
    const Manifest m = Manifest::read(root / "manifest.txt");
    const fs::path mp = root / "manifest.txt";
    if (m.get("format") != "topogrid-grid-store") detail::throw_io(mp, "not a grid store");
    if (m.get("version") != std::to_string(detail::kStoreVersion)) detail::throw_io(mp, "unsupported version");
    const auto vs = m.get_list("volume-shape");
    const auto bs = m.get_list("block-shape");
    if (vs.size() != 3 || bs.size() != 3) detail::throw_io(mp, "bad shape entries");
    GridStore s;
    s.root_ = root;
    s.layout_ = BlockLayout(BlockSpec(GridShape(coord_t(vs[0]), coord_t(vs[1]), coord_t(vs[2])),
                                      {coord_t(bs[0]), coord_t(bs[1]), coord_t(bs[2])}));
    if (m.get_list("block-count") != std::vector<std::uint64_t>{s.layout_.size()})
      detail::throw_io(mp, "block count does not match shapes");
    if (m.get("state") == "finalized") s.load_finalized(m);
    return s;
  }

  const fs::path& root() const { return root_; }
  const BlockLayout& layout() const { return layout_; }
  const BlockSpec& spec() const { return layout_.spec(); }
  bool finalized() const { return finalized_; }

  // --- repository interface used by extract_blockwise ---

  void prepare(const BlockLayout& layout) const {
    if (!(layout.spec() == layout_.spec())) throw state_error("grid store was created for a different block spec");
    if (finalized_) throw state_error("grid store is already finalized");
  }

  void write_block(const BlockResult& result) const {
    const std::size_t i = result.info.range.index;
    if (i >= layout_.size()) throw bounds_error("block index out of range");
    const fs::path dir = block_dir(i);
    if (fs::exists(dir)) throw store_error("block " + std::to_string(i) + " already written");
    std::ostringstream tmp_name;
    tmp_name << ".tmp-" << i << '-' << std::this_thread::get_id();
    const fs::path tmp = root_ / "blocks" / tmp_name.str();
    try {
      fs::create_directories(tmp);
      const auto& tau = result.local_tau.cells();
      const auto e = tau.extents();
      write_array(tmp / "topological-grid.arr", tau.values(),
                  {std::uint64_t(e[0]), std::uint64_t(e[1]), std::uint64_t(e[2])});
      write_array(tmp / "max-labels.arr", std::span<const label_t>(result.info.max_labels), {4});
      for (int c = 0; c < 3; ++c)
        detail::write_table(tmp / ("neighborhood-" + std::to_string(c) + ".arr"), result.info.neighborhoods[c]);
      std::vector<label_t> cand;
      for (const auto& z : result.info.zero_candidates) {
        cand.insert(cand.end(), {label_t(z.cell.t1), label_t(z.cell.t2), label_t(z.cell.t3), z.local_label});
        cand.insert(cand.end(), z.around.begin(), z.around.end());
      }
      write_array(tmp / "zero-cell-candidates.arr", cand, {10, std::uint64_t(result.info.zero_candidates.size())});
      fs::rename(tmp, dir);
    } catch (...) {
      std::error_code ec;
      fs::remove_all(tmp, ec);
      throw;
    }
  }

  TopologicalLabelMap load_tau(std::size_t index) const {
    const BlockRange r = layout_[index];
    const fs::path p = block_dir(index) / "topological-grid.arr";
    std::vector<std::uint64_t> ext;
    auto labels = read_array<label_t>(p, &ext);
    const GridShape shape = r.shape();
    if (ext.size() != 3 || ext[0] != std::uint64_t(shape.cells(0)) || ext[1] != std::uint64_t(shape.cells(1)) ||
        ext[2] != std::uint64_t(shape.cells(2)))
      detail::throw_io(p, "block grid has wrong extents");
    return TopologicalLabelMap(shape, std::move(labels));
  }

  BlockSummary load_summary(std::size_t index) const {
    const fs::path dir = block_dir(index);
    BlockSummary s;
    s.range = layout_[index];
    s.max_labels = detail::to_labels<4>(to_u64(read_array<label_t>(dir / "max-labels.arr")), dir, "max-labels");
    for (int c = 0; c < 3; ++c)
      s.neighborhoods[c] = detail::read_table(dir / ("neighborhood-" + std::to_string(c) + ".arr"), c);
    const auto cand = read_array<label_t>(dir / "zero-cell-candidates.arr");
    for (std::size_t k = 0; k + 10 <= cand.size(); k += 10) {
      ZeroCellCandidate z;
      z.cell = {coord_t(cand[k]), coord_t(cand[k + 1]), coord_t(cand[k + 2])};
      z.local_label = cand[k + 3];
      std::copy(cand.begin() + std::ptrdiff_t(k + 4), cand.begin() + std::ptrdiff_t(k + 10), z.around.begin());
      s.zero_candidates.push_back(z);
    }
    return s;
  }

  void finalize(const BlockLayout& layout, const GlobalLabeling& labeling) {
    prepare(layout);
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      if (!fs::exists(block_dir(i))) throw state_error("block " + std::to_string(i) + " missing at finalize");
      write_array(block_dir(i) / "label-offsets.arr", std::span<const label_t>(labeling.offsets.offsets.at(i)), {3});
    }
    write_array(root_ / "relabeling-1.arr", labeling.relabeling[1], {labeling.relabeling[1].size()});
    write_array(root_ / "relabeling-2.arr", labeling.relabeling[2], {labeling.relabeling[2].size()});
    write_array(root_ / "zero-cell-activity.arr", labeling.relabeling[0], {labeling.relabeling[0].size()});
    for (int c = 0; c < 3; ++c)
      detail::write_table(root_ / ("neighborhood-" + std::to_string(c) + ".arr"), labeling.tables[c]);
    labeling_ = labeling;
    finalized_ = true;
    write_manifest("finalized");
  }

  // --- queries on a finalized store ---

  // Global label of one cell: reads a single element of the owning block's
  // grid and maps it through the in-memory offsets and relabelings.
  CellLabel query_label(const CellCoord& t) const {
    require_finalized();
    const std::size_t b = layout_.owner(t);
    const BlockRange r = layout_[b];
    const CellCoord lt = r.to_local(t);
    const GridShape bs = r.shape();
    const std::uint64_t idx = std::uint64_t(lt.t1 - 1) +
                              std::uint64_t(bs.cells(0)) * (std::uint64_t(lt.t2 - 1) + std::uint64_t(bs.cells(1)) * std::uint64_t(lt.t3 - 1));
    const label_t local = read_element<label_t>(block_dir(b) / "topological-grid.arr", idx);
    const CellOrder c = cell_order(t);
    return {c, labeling_.global_label(b, c, local)};
  }

  // Global (j+1)-components bounded by j-component q, ascending.
  std::vector<label_t> neighbors(CellOrder j, label_t q) const {
    require_finalized();
    if (j < 0 || j > 2) throw std::invalid_argument("neighbors: order must be 0, 1 or 2");
    const auto row = labeling_.tables[j].row(q);
    std::vector<label_t> out;
    for (label_t x : row)
      if (x != 0) out.push_back(x);
    return out;
  }

  const GlobalLabeling& labeling() const {
    require_finalized();
    return labeling_;
  }
  // K0, K1, K2 and the max segment label.
  const std::array<label_t, 4>& counts() const { return labeling().counts; }

 private:
  fs::path block_dir(std::size_t i) const { return root_ / "blocks" / std::to_string(i); }

  static std::vector<std::uint64_t> to_u64(const std::vector<label_t>& v) { return {v.begin(), v.end()}; }

  void require_finalized() const {
    if (!finalized_) throw state_error(root_.string() + ": grid store is not finalized");
  }

  void write_manifest(const char* state) const {
    Manifest m;
    m.set("format", "topogrid-grid-store");
    m.set("version", std::to_string(detail::kStoreVersion));
    m.set_list("volume-shape", spec().volume().voxel_extents());
    m.set_list("block-shape", spec().block());
    m.set("block-count", std::to_string(layout_.size()));
    m.set("state", state);
    if (finalized_) {
      m.set_list("max-labels", labeling_.offsets.totals);
      m.set_list("component-counts", labeling_.counts);
    }
    m.write(root_ / "manifest.txt");
  }

  void load_finalized(const Manifest& m) {
    const fs::path mp = root_ / "manifest.txt";
    GlobalLabeling g;
    g.offsets.totals = detail::to_labels<3>(m.get_list("max-labels"), mp, "max-labels");
    g.counts = detail::to_labels<4>(m.get_list("component-counts"), mp, "component-counts");
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      const fs::path dir = block_dir(i);
      for (const char* rec : {"topological-grid.arr", "max-labels.arr", "neighborhood-0.arr", "neighborhood-1.arr",
                              "neighborhood-2.arr", "zero-cell-candidates.arr"})
        if (!fs::exists(dir / rec)) detail::throw_io(dir / rec, "missing block record");
      g.offsets.offsets.push_back(
          detail::to_labels<3>(to_u64(read_array<label_t>(dir / "label-offsets.arr")), dir, "label-offsets"));
    }
    g.relabeling[1] = read_array<label_t>(root_ / "relabeling-1.arr");
    g.relabeling[2] = read_array<label_t>(root_ / "relabeling-2.arr");
    g.relabeling[0] = read_array<label_t>(root_ / "zero-cell-activity.arr");
    for (int c = 0; c < 3; ++c) {
      if (g.relabeling[c].size() != g.offsets.totals[c])
        detail::throw_io(root_, "relabeling-" + std::to_string(c) + " has wrong length");
      g.tables[c] = detail::read_table(root_ / ("neighborhood-" + std::to_string(c) + ".arr"), c);
      if (g.tables[c].rows() != g.counts[c])
        detail::throw_io(root_, "neighborhood-" + std::to_string(c) + " has wrong row count");
    }
    labeling_ = std::move(g);
    finalized_ = true;
  }

  fs::path root_;
  BlockLayout layout_;
  bool finalized_ = false;
  GlobalLabeling labeling_;
};

// Coordinate lists of every component, split into per-block fragments.
class GeometryStore {
 public:
  static GeometryStore open(const fs::path& root) {
    const fs::path mp = root / "manifest.txt";
    const Manifest m = Manifest::read(mp);
    if (m.get("format") != "topogrid-geometry-store") detail::throw_io(mp, "not a geometry store");
    if (m.get("version") != std::to_string(detail::kStoreVersion)) detail::throw_io(mp, "unsupported version");
    GeometryStore s;
    s.root_ = root;
    const auto bins = m.get_list("number-of-bins");
    if (bins.size() != 1 || bins[0] == 0) detail::throw_io(mp, "bad number-of-bins");
    s.bins_ = std::uint32_t(bins[0]);
    const auto shape = m.get_list("segmentation-shape");
    if (shape.size() != 3) detail::throw_io(mp, "bad segmentation-shape");
    s.shape_ = GridShape(coord_t(shape[0]), coord_t(shape[1]), coord_t(shape[2]));
    s.counts_ = detail::to_labels<4>(m.get_list("max-labels"), mp, "max-labels");
    for (int j = 1; j <= 3; ++j) {
      s.parts_[j] = read_array<label_t>(root / ("parts-counters-" + std::to_string(j) + ".arr"));
      if (s.parts_[j].size() != s.counts_[j]) detail::throw_io(root, "parts-counters-" + std::to_string(j) + " has wrong length");
    }
    return s;
  }

  const fs::path& root() const { return root_; }
  std::uint32_t bins() const { return bins_; }
  const GridShape& shape() const { return shape_; }
  // K0, K1, K2 and the max segment label.
  const std::array<label_t, 4>& counts() const { return counts_; }

  label_t parts(CellOrder j, label_t q) const {
    check(j, q);
    return parts_[j][q - 1];
  }

  // All cells of j-component q (j = 1, 2, 3), fragments in block order.
  std::vector<CellCoord> read_component(CellOrder j, label_t q) const {
    const label_t n = parts(j, q);
    if (n == 0) throw not_found_error(std::to_string(j) + "-component " + std::to_string(q) + " has no cells");
    std::vector<CellCoord> out;
    for (label_t p = 0; p < n; ++p) append_coords(fragment_path(root_, bins_, j, q, p), out);
    return out;
  }

  // Active 0-cells; element q-1 is 0-cell q.
  std::vector<CellCoord> zero_cells() const {
    std::vector<CellCoord> out;
    append_coords(root_ / "0-cells.arr", out);
    return out;
  }

  static fs::path fragment_path(const fs::path& root, std::uint32_t bins, CellOrder j, label_t q, label_t p) {
    return root / (std::to_string(j) + "-components") / ("bin-" + std::to_string(q % bins)) /
           (std::to_string(q) + "-" + std::to_string(p) + ".arr");
  }

 private:
  void check(CellOrder j, label_t q) const {
    if (j < 1 || j > 3) throw std::invalid_argument("component order must be 1, 2 or 3");
    if (q == 0 || q > counts_[j])
      throw not_found_error("no " + std::to_string(j) + "-component with label " + std::to_string(q));
  }

  static void append_coords(const fs::path& path, std::vector<CellCoord>& out) {
    std::vector<std::uint64_t> ext;
    const auto v = read_array<coord_t>(path, &ext);
    if (ext.size() != 2 || ext[0] != 3) detail::throw_io(path, "coordinate table must have 3 columns");
    for (std::size_t k = 0; k < v.size(); k += 3) out.push_back({v[k], v[k + 1], v[k + 2]});
  }

  fs::path root_;
  std::uint32_t bins_ = 1;
  GridShape shape_;
  std::array<label_t, 4> counts_{};
  std::array<std::vector<label_t>, 4> parts_;
};

inline constexpr std::uint32_t kDefaultBins = 4096;

// Builds the coordinate lists by streaming each block once. A block emits
// only the cells it owns, so every cell lands in exactly one fragment.
inline GeometryStore write_geometry(const GridStore& grid, const fs::path& root, std::uint32_t bins = kDefaultBins,
                                    bool force = false) {
  if (!grid.finalized()) throw state_error(grid.root().string() + ": grid store is not finalized");
  if (bins == 0) throw std::invalid_argument("number of bins must be positive");
  detail::prepare_root(root, force);
  const auto& layout = grid.layout();
  const auto& labeling = grid.labeling();
  const auto counts = labeling.counts;

  std::array<std::vector<label_t>, 4> parts;
  for (int j = 1; j <= 3; ++j) {
    parts[j].assign(counts[j], 0);
    fs::create_directories(root / (std::to_string(j) + "-components"));
  }
  std::vector<coord_t> zero_cells;

  for (std::size_t b = 0; b < layout.size(); ++b) {
    const BlockRange r = layout[b];
    const TopologicalLabelMap tau = grid.load_tau(b);
    const auto [lo, hi] = layout.owned_cells(b);
    std::array<std::map<label_t, std::vector<coord_t>>, 4> fragments;
    for (coord_t t3 = lo.t3; t3 <= hi.t3; ++t3)
      for (coord_t t2 = lo.t2; t2 <= hi.t2; ++t2)
        for (coord_t t1 = lo.t1; t1 <= hi.t1; ++t1) {
          const CellCoord t{t1, t2, t3};
          const label_t local = tau[r.to_local(t)];
          if (local == 0) continue;
          const CellOrder j = cell_order(t);
          const label_t q = labeling.global_label(b, j, local);
          if (q == 0) continue;
          if (j == 0) {
            if (q != zero_cells.size() / 3 + 1) throw consistency_error("0-cells out of label order");
            zero_cells.insert(zero_cells.end(), {t1, t2, t3});
          } else {
            fragments[j][q].insert(fragments[j][q].end(), {t1, t2, t3});
          }
        }
    for (int j = 1; j <= 3; ++j)
      for (const auto& [q, coords] : fragments[j]) {
        if (q > counts[j]) throw consistency_error("component label exceeds component count");
        const fs::path p = GeometryStore::fragment_path(root, bins, j, q, parts[j][q - 1]++);
        fs::create_directories(p.parent_path());
        write_array(p, coords, {3, coords.size() / 3});
      }
  }

  write_array(root / "0-cells.arr", zero_cells, {3, zero_cells.size() / 3});
  for (int j = 1; j <= 3; ++j)
    write_array(root / ("parts-counters-" + std::to_string(j) + ".arr"), parts[j], {parts[j].size()});
  Manifest m;
  m.set("format", "topogrid-geometry-store");
  m.set("version", std::to_string(detail::kStoreVersion));
  m.set("number-of-bins", std::to_string(bins));
  m.set_list("segmentation-shape", grid.spec().volume().voxel_extents());
  m.set_list("max-labels", counts);
  m.write(root / "manifest.txt");
  return GeometryStore::open(root);
}

}  // namespace topogrid
