#pragma once

// Shared test data and brute-force reference implementations. Nothing in
// here calls the labeling code under test.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "topogrid/topogrid.hpp"

namespace support {

using namespace topogrid;

// Topological label map of the 3x3x2 corner example, [t3][t1][t2].
inline constexpr label_t kCornerTau[3][5][5] = {
    {{1, 0, 1, 0, 1}, {0, 0, 1, 0, 0}, {1, 1, 2, 1, 1}, {0, 0, 1, 0, 2}, {1, 0, 1, 2, 3}},
    {{3, 0, 3, 0, 3}, {0, 0, 1, 0, 0}, {3, 1, 4, 1, 3}, {0, 0, 1, 0, 2}, {3, 0, 3, 2, 5}},
    {{4, 0, 4, 0, 4}, {0, 0, 6, 0, 0}, {4, 6, 5, 6, 4}, {0, 0, 6, 0, 7}, {4, 0, 4, 7, 6}},
};

// Local map of the block covering voxel rows 2..3, columns 2..3.
inline constexpr label_t kCornerBlockTau[3][3][3] = {
    {{2, 1, 1}, {1, 0, 2}, {1, 2, 3}},
    {{3, 2, 5}, {1, 1, 4}, {4, 3, 6}},
    {{5, 7, 4}, {7, 0, 8}, {4, 8, 6}},
};

template <std::size_t N>
TopologicalLabelMap from_table(const label_t (&table)[3][N][N]) {
  const coord_t n = coord_t(N + 1) / 2;
  TopologicalLabelMap tau(GridShape(n, n, 2));
  for (coord_t t3 = 1; t3 <= 3; ++t3)
    for (coord_t t1 = 1; t1 <= coord_t(N); ++t1)
      for (coord_t t2 = 1; t2 <= coord_t(N); ++t2) tau.cells()(t1, t2, t3) = table[t3 - 1][t1 - 1][t2 - 1];
  return tau;
}

inline int order_of(const CellCoord& t) { return (t.t1 & 1) + (t.t2 & 1) + (t.t3 & 1); }

inline bool inside(const CellCoord& t, const std::array<coord_t, 3>& ext) {
  for (int a = 0; a < 3; ++a)
    if (t[a] < 1 || t[a] > ext[a]) return false;
  return true;
}

// All in-grid 6-neighbours one order higher, in axis-major, minus-first order.
inline std::vector<CellCoord> gamma_ref(const CellCoord& t, const std::array<coord_t, 3>& ext) {
  std::vector<CellCoord> out;
  for (int a = 0; a < 3; ++a)
    for (int d : {-1, 1}) {
      CellCoord u = t;
      u[a] += d;
      if (inside(u, ext) && order_of(u) == order_of(t) + 1) out.push_back(u);
    }
  return out;
}

// Labels occurring exactly once, ascending, zeros dropped.
inline std::vector<label_t> once_ref(const std::vector<label_t>& x) {
  std::map<label_t, int> n;
  for (label_t v : x)
    if (v > 0) ++n[v];
  std::vector<label_t> out;
  for (auto [v, k] : n)
    if (k == 1) out.push_back(v);
  return out;
}

inline std::vector<label_t> signature_ref(const TopologicalLabelMap& tau, const CellCoord& t) {
  std::vector<label_t> x;
  for (const auto& u : gamma_ref(t, tau.cells().extents())) x.push_back(tau[u]);
  return once_ref(x);
}

// u and v are distinct and both Gamma-neighbours of one cell.
inline bool connected_ref(const CellCoord& u, const CellCoord& v, const std::array<coord_t, 3>& ext) {
  if (u == v) return false;
  for (coord_t a = 1; a <= ext[0]; ++a)
    for (coord_t b = 1; b <= ext[1]; ++b)
      for (coord_t c = 1; c <= ext[2]; ++c) {
        const auto g = gamma_ref({a, b, c}, ext);
        if (std::find(g.begin(), g.end(), u) != g.end() && std::find(g.begin(), g.end(), v) != g.end()) return true;
      }
  return false;
}

template <class F>
void for_each_cell(const std::array<coord_t, 3>& ext, F&& f) {
  for (coord_t c = 1; c <= ext[2]; ++c)
    for (coord_t b = 1; b <= ext[1]; ++b)
      for (coord_t a = 1; a <= ext[0]; ++a) f(CellCoord{a, b, c});
}

// Whole-volume labeling by union-find over shared lower-order cells.
inline TopologicalLabelMap reference_labeling(const SegmentLabelMap& sigma) {
  const GridShape shape = sigma.shape();
  TopologicalLabelMap tau(shape);
  const auto ext = tau.cells().extents();
  for_each_cell(ext, [&](const CellCoord& t) {
    if (order_of(t) == 3) tau.cells()(t.t1, t.t2, t.t3) = sigma[VoxelCoord{(t.t1 + 1) / 2, (t.t2 + 1) / 2, (t.t3 + 1) / 2}];
  });

  const std::size_t n = tau.cells().size();
  auto flat = [&](const CellCoord& t) { return tau.cells().index(t.t1, t.t2, t.t3); };
  for (int c : {2, 1}) {
    std::vector<std::vector<label_t>> sig(n);
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for_each_cell(ext, [&](const CellCoord& t) {
      if (order_of(t) == c) sig[flat(t)] = signature_ref(tau, t);
    });
    for_each_cell(ext, [&](const CellCoord& w) {
      if (order_of(w) != c - 1) return;
      const auto g = gamma_ref(w, ext);
      for (const auto& u : g)
        for (const auto& v : g)
          if (!sig[flat(u)].empty() && sig[flat(u)] == sig[flat(v)]) parent[find(flat(u))] = find(flat(v));
    });
    std::map<std::size_t, label_t> ids;
    for_each_cell(ext, [&](const CellCoord& t) {
      if (order_of(t) != c || sig[flat(t)].empty()) return;
      const auto [it, fresh] = ids.try_emplace(find(flat(t)), label_t(ids.size() + 1));
      tau.cells()(t.t1, t.t2, t.t3) = it->second;
    });
  }
  label_t next = 0;
  for_each_cell(ext, [&](const CellCoord& t) {
    if (order_of(t) == 0 && !signature_ref(tau, t).empty()) tau.cells()(t.t1, t.t2, t.t3) = ++next;
  });
  return tau;
}

// Same zero pattern and a per-order label bijection. Checked pairwise on
// labels rather than with the library's one-pass maps.
inline bool same_partition(const TopologicalLabelMap& a, const TopologicalLabelMap& b) {
  if (!(a.shape() == b.shape())) return false;
  std::array<std::map<label_t, label_t>, 4> ab, ba;
  bool ok = true;
  for_each_cell(a.cells().extents(), [&](const CellCoord& t) {
    const label_t x = a[t], y = b[t];
    if ((x == 0) != (y == 0)) ok = false;
    if (x == 0 || y == 0) return;
    const int c = order_of(t);
    if (ab[c].try_emplace(x, y).first->second != y) ok = false;
    if (ba[c].try_emplace(y, x).first->second != x) ok = false;
  });
  return ok;
}

// Literal per-cell check of a whole-volume extraction: 3-cells carry the
// segment label, lower cells are active iff their signature is non-empty,
// and the table row of an active cell's component equals that signature.
inline bool audit_extraction(const SegmentLabelMap& sigma, const Extraction& ex, std::string* why = nullptr) {
  bool ok = true;
  for_each_cell(ex.tau.cells().extents(), [&](const CellCoord& t) {
    if (!ok) return;
    const int c = order_of(t);
    const label_t l = ex.tau[t];
    auto fail = [&](const char* what) {
      ok = false;
      if (why) {
        std::ostringstream msg;
        msg << "cell " << t << ": " << what;
        *why = msg.str();
      }
    };
    if (c == 3) {
      if (l != sigma[VoxelCoord{(t.t1 + 1) / 2, (t.t2 + 1) / 2, (t.t3 + 1) / 2}]) fail("segment label differs");
      return;
    }
    const auto sig = signature_ref(ex.tau, t);
    if (sig.empty() != (l == 0)) return fail("activity differs from signature");
    if (l == 0) return;
    if (l > ex.tables[c].rows()) return fail("label has no table row");
    std::vector<label_t> row;
    for (label_t x : ex.tables[c].row(l))
      if (x != 0) row.push_back(x);
    if (row != sig) fail("table row differs from signature");
  });
  return ok;
}

struct RandomCase {
  SegmentLabelMap sigma;
  BlockSpec spec;
};

// Shapes 2..max_extent per axis, 1..6 labels, block extents 2..n per axis.
inline RandomCase random_case(std::mt19937_64& rng, coord_t max_extent = 6) {
  std::uniform_int_distribution<coord_t> ext(2, max_extent);
  std::uniform_int_distribution<label_t> labels(1, 6);
  const GridShape shape(ext(rng), ext(rng), ext(rng));
  std::array<coord_t, 3> block{};
  for (int a = 0; a < 3; ++a) block[a] = std::uniform_int_distribution<coord_t>(2, shape.voxels(a))(rng);
  SegmentLabelMap sigma = fixtures::random_labels(shape, labels(rng), rng());
  return {std::move(sigma), BlockSpec(shape, block)};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("topogrid-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace support
