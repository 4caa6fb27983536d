// Labels a small random segmentation block by block, stores the result and
// reads back a few facts about it.

#include <filesystem>
#include <iostream>

#include "topogrid/topogrid.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  using namespace topogrid;

  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "topogrid-sample";
  const SegmentLabelMap sigma = fixtures::random_segments(GridShape(24, 24, 24), 40, 7);
  const BlockSpec spec(sigma.shape(), {9, 9, 9});

  GridStore grid = GridStore::create(work / "grid", spec, /*force=*/true);
  PipelineOptions options;
  options.workers = 4;
  const PipelineResult run = extract_blockwise(sigma, spec, grid, options);
  const auto& k = run.labeling.counts;
  std::cout << run.layout.size() << " blocks: " << k[2] << " faces, " << k[1] << " curves, " << k[0]
            << " points\n";

  if (k[2] > 0) {
    const auto segs = grid.neighbors(2, 1);
    std::cout << "face 1 separates segments " << segs[0] << " and " << segs[1] << '\n';
  }

  const GeometryStore geom = write_geometry(grid, work / "geometry", 64, true);
  if (k[1] > 0) std::cout << "curve 1 has " << geom.read_component(1, 1).size() << " cells\n";

  const CellLabel center = grid.query_label({24, 24, 24});
  std::cout << "cell (24,24,24) is a " << center.order << "-cell with label " << center.label << '\n';
}
