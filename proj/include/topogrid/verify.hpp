#pragma once

// Correctness checks: isomorphism of topological label maps and agreement
// of on-disk stores with in-memory labelings.

#include <algorithm>
#include <array>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "blockwise.hpp"
#include "labeling.hpp"
#include "store.hpp"

namespace topogrid {

// Which cell orders take part in a comparison, indexed by order.
using OrderFilter = std::array<bool, 4>;
inline constexpr OrderFilter kAllOrders{true, true, true, true};

struct IsomorphismReport {
  bool isomorphic = true;
  // Cells violating the check: (u, u) if exactly one map leaves u inactive,
  // (u, v) if u and v share a label in one map but not in the other.
  std::optional<std::pair<CellCoord, CellCoord>> witness;
  std::string reason;
  // Distinct non-zero labels per order in the first and the second map.
  std::array<std::pair<std::size_t, std::size_t>, 4> counts{};

  explicit operator bool() const { return isomorphic; }
};

// Two maps are isomorphic iff they agree on which cells are inactive and a
// label bijection, per cell order, carries one onto the other. Linear time.
inline IsomorphismReport check_isomorphic(const TopologicalLabelMap& a, const TopologicalLabelMap& b,
                                          const OrderFilter& orders = kAllOrders) {
  if (!(a.shape() == b.shape())) throw std::invalid_argument("check_isomorphic: grid shapes differ");
  IsomorphismReport report;
  struct Seen {
    label_t other;
    CellCoord first;
  };
  std::array<std::unordered_map<label_t, Seen>, 4> fwd, bwd;

  auto fail = [&](const CellCoord& u, const CellCoord& v, std::string why) {
    if (!report.isomorphic) return;
    report.isomorphic = false;
    report.witness = {u, v};
    report.reason = std::move(why);
  };

  const auto ext = a.cells().extents();
  for (coord_t t3 = 1; t3 <= ext[2]; ++t3)
    for (coord_t t2 = 1; t2 <= ext[1]; ++t2)
      for (coord_t t1 = 1; t1 <= ext[0]; ++t1) {
        const CellCoord u{t1, t2, t3};
        const CellOrder c = cell_order(u);
        if (!orders[c]) continue;
        const label_t la = a[u], lb = b[u];
        if ((la == 0) != (lb == 0)) {
          fail(u, u, "cell is active in only one labeling");
          continue;
        }
        if (la == 0) continue;
        auto [fi, fnew] = fwd[c].try_emplace(la, Seen{lb, u});
        if (!fnew && fi->second.other != lb) fail(fi->second.first, u, "cells share a label only in the first labeling");
        auto [bi, bnew] = bwd[c].try_emplace(lb, Seen{la, u});
        if (!bnew && bi->second.other != la) fail(bi->second.first, u, "cells share a label only in the second labeling");
      }
  for (int c = 0; c < 4; ++c) report.counts[c] = {fwd[c].size(), bwd[c].size()};
  return report;
}

inline std::ostream& operator<<(std::ostream& os, const IsomorphismReport& r) {
  os << (r.isomorphic ? "isomorphic" : "not isomorphic");
  if (r.witness) os << ": " << r.reason << ' ' << r.witness->first << ' ' << r.witness->second;
  return os;
}

// Whole-volume labeling versus block-wise labeling of the same volume.
inline IsomorphismReport verify_pipeline(const SegmentLabelMap& sigma, const BlockSpec& spec,
                                         const PipelineOptions& options = {}) {
  const Extraction oracle = extract_full(sigma);
  const BlockwiseLabeling blockwise = blockwise_labeling(sigma, spec, options);
  return check_isomorphic(oracle.tau, blockwise.tau);
}

// Checks every cell query and every coordinate list of the stores against
// `expected`, the labeling the stores were built from. On mismatch returns
// false and describes the first difference in `failure`.
inline bool verify_store_contents(const GridStore& grid, const GeometryStore& geom,
                                  const TopologicalLabelMap& expected, std::string* failure = nullptr) {
  auto fail = [&](const std::string& what) {
    if (failure) *failure = what;
    return false;
  };
  const auto ext = expected.cells().extents();
  std::array<std::map<label_t, std::vector<CellCoord>>, 4> cells;
  for (coord_t t3 = 1; t3 <= ext[2]; ++t3)
    for (coord_t t2 = 1; t2 <= ext[1]; ++t2)
      for (coord_t t1 = 1; t1 <= ext[0]; ++t1) {
        const CellCoord t{t1, t2, t3};
        const CellOrder c = cell_order(t);
        const CellLabel got = grid.query_label(t);
        if (got.order != c || got.label != expected[t]) {
          std::ostringstream msg;
          msg << "cell " << t << ": store has label " << got.label << ", expected " << expected[t];
          return fail(msg.str());
        }
        if (expected[t] != 0) cells[c][expected[t]].push_back(t);
      }

  for (CellOrder j = 1; j <= 3; ++j) {
    for (label_t q = 1; q <= geom.counts()[j]; ++q) {
      const auto it = cells[j].find(q);
      if (it == cells[j].end()) {
        if (geom.parts(j, q) != 0) return fail(std::to_string(j) + "-component " + std::to_string(q) + " should not exist");
        continue;
      }
      auto got = geom.read_component(j, q);
      auto want = it->second;
      std::sort(got.begin(), got.end());
      std::sort(want.begin(), want.end());
      if (got != want) return fail(std::to_string(j) + "-component " + std::to_string(q) + " has the wrong cells");
    }
    if (!cells[j].empty() && cells[j].rbegin()->first > geom.counts()[j])
      return fail(std::to_string(j) + "-component labels exceed stored count");
  }

  const auto zeros = geom.zero_cells();
  if (zeros.size() != cells[0].size()) return fail("wrong number of active 0-cells");
  for (const auto& [q, ts] : cells[0])
    if (q > zeros.size() || ts.size() != 1 || zeros[q - 1] != ts.front())
      return fail("0-cell " + std::to_string(q) + " has the wrong coordinates");
  return true;
}

// Runs the block-wise pipeline into stores under `workdir` and checks them
// against the same labeling computed in memory.
inline bool verify_store(const SegmentLabelMap& sigma, const BlockSpec& spec, const fs::path& workdir,
                         std::string* failure = nullptr, const PipelineOptions& options = {}) {
  GridStore grid = GridStore::create(workdir / "grid", spec, true);
  extract_blockwise(sigma, spec, grid, options);
  const GeometryStore geom = write_geometry(grid, workdir / "geometry", 16, true);
  const BlockwiseLabeling expected = blockwise_labeling(sigma, spec, options);
  return verify_store_contents(GridStore::open(workdir / "grid"), geom, expected.tau, failure);
}

}  // namespace topogrid
