#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "support.hpp"

using namespace topogrid;
namespace fs = std::filesystem;

namespace {

struct CornerStores {
  fs::path dir;
  GridStore grid;
  GeometryStore geom;
};

CornerStores corner_stores(const std::string& name) {
  const auto dir = support::scratch_dir(name);
  const auto sigma = fixtures::corner_example();
  const BlockSpec spec(sigma.shape(), {2, 2, 2});
  GridStore grid = GridStore::create(dir / "grid", spec);
  extract_blockwise(sigma, spec, grid);
  GeometryStore geom = write_geometry(grid, dir / "geometry", 8);
  return {dir, GridStore::open(dir / "grid"), std::move(geom)};
}

}  // namespace

TEST(ArrayFile, RoundTripAndHeader) {
  const auto dir = support::scratch_dir("array");
  const std::vector<std::int32_t> v{-1, 2, 3, 4, 5, 6};
  write_array(dir / "a.arr", std::span<const std::int32_t>(v), {3, 2});
  std::vector<std::uint64_t> ext;
  EXPECT_EQ(read_array<std::int32_t>(dir / "a.arr", &ext), v);
  EXPECT_EQ(ext, (std::vector<std::uint64_t>{3, 2}));
  EXPECT_EQ(read_element<std::int32_t>(dir / "a.arr", 4), 5);
  EXPECT_THROW(read_array<std::uint32_t>(dir / "a.arr"), store_error);
  EXPECT_THROW(read_element<std::int32_t>(dir / "a.arr", 6), bounds_error);

  std::ifstream in(dir / "a.arr", std::ios::binary);
  unsigned char head[16];
  in.read(reinterpret_cast<char*>(head), 16);
  EXPECT_EQ(std::string(reinterpret_cast<char*>(head), 4), "TGAR");
  EXPECT_EQ(head[4], 4);
  EXPECT_EQ(head[6], 2);
  EXPECT_EQ(head[8], 6);
  EXPECT_EQ(fs::file_size(dir / "a.arr"), 16u + 2 * 8 + 6 * 4);
}

TEST(ArrayFile, SegmentationFileAndVolumeBlocks) {
  const auto dir = support::scratch_dir("volume");
  const auto sigma = fixtures::random_segments(GridShape(7, 5, 4), 9, 1);
  write_segmentation(dir / "seg.arr", sigma);
  const VolumeFile vf = VolumeFile::open_array(dir / "seg.arr");
  EXPECT_EQ(vf.shape(), sigma.shape());
  EXPECT_EQ(vf.read_all(), sigma);
  const BlockLayout layout(BlockSpec(sigma.shape(), {3, 4, 2}));
  for (const auto& r : layout.blocks()) EXPECT_EQ(vf.read_block(r), crop(sigma, r));

  const auto raw = dir / "seg.raw";
  {
    std::ofstream out(raw, std::ios::binary);
    for (label_t l : sigma.voxels().values()) out.write(reinterpret_cast<const char*>(&l), 4);
  }
  EXPECT_EQ(VolumeFile::open_raw(raw, sigma.shape()).read_all(), sigma);
  EXPECT_THROW(VolumeFile::open_raw(raw, GridShape(7, 5, 5)), store_error);
}

TEST(Manifest, RoundTrip) {
  const auto dir = support::scratch_dir("manifest");
  Manifest m;
  m.set("format", "x");
  m.set_list("shape", std::vector<int>{3, 4, 5});
  m.write(dir / "manifest.txt");
  EXPECT_FALSE(fs::exists(dir / "manifest.txt.tmp"));
  const Manifest r = Manifest::read(dir / "manifest.txt");
  EXPECT_EQ(r.get("format"), "x");
  EXPECT_EQ(r.get_list("shape"), (std::vector<std::uint64_t>{3, 4, 5}));
  EXPECT_THROW(r.get("missing"), store_error);
}

TEST(GridStore, WriteBlockRoundTrip) {
  const auto dir = support::scratch_dir("roundtrip");
  const auto sigma = fixtures::corner_example();
  const BlockSpec spec(sigma.shape(), {2, 2, 2});
  const BlockLayout layout(spec);
  GridStore grid = GridStore::create(dir / "grid", spec);
  const BlockResult res = process_block(sigma, layout, 3);
  grid.write_block(res);
  EXPECT_EQ(grid.load_tau(3), res.local_tau);
  EXPECT_EQ(grid.load_summary(3), res.info);
  EXPECT_THROW(grid.write_block(res), store_error);
}

TEST(GridStore, ConcurrentBlockWrites) {
  const auto dir = support::scratch_dir("concurrent");
  const auto sigma = fixtures::random_segments(GridShape(9, 9, 9), 12, 3);
  const BlockSpec spec(sigma.shape(), {4, 4, 4});
  const BlockLayout layout(spec);
  GridStore grid = GridStore::create(dir / "grid", spec);
  std::vector<BlockResult> results;
  for (std::size_t i = 0; i < layout.size(); ++i) results.push_back(process_block(sigma, layout, i));
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < results.size(); ++i) threads.emplace_back([&, i] { grid.write_block(results[i]); });
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < results.size(); ++i) {
    EXPECT_EQ(grid.load_tau(i), results[i].local_tau);
    EXPECT_EQ(grid.load_summary(i), results[i].info);
  }
}

TEST(GridStore, CornerManifestAndQueries) {
  auto s = corner_stores("corner");
  const Manifest m = Manifest::read(s.dir / "grid" / "manifest.txt");
  EXPECT_EQ(m.get("state"), "finalized");
  EXPECT_EQ(m.get("block-count"), "4");
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(fs::exists(s.dir / "grid" / "blocks" / std::to_string(i) / "topological-grid.arr"));

  const CellLabel center = s.grid.query_label({3, 3, 1});
  EXPECT_EQ(center.order, 3);
  EXPECT_EQ(center.label, 2u);
  const CellLabel corner = s.grid.query_label({2, 2, 1});
  EXPECT_EQ(corner.order, 1);
  EXPECT_EQ(corner.label, 0u);
  EXPECT_EQ(s.grid.query_label({4, 4, 2}).label, 0u);
  EXPECT_THROW(s.grid.query_label({6, 1, 1}), bounds_error);
  EXPECT_EQ(s.grid.counts(), (std::array<label_t, 4>{0, 2, 7, 6}));
}

TEST(GridStore, CornerNeighbors) {
  auto s = corner_stores("neighbors");
  const label_t face12 = s.grid.query_label({3, 4, 1}).label;  // voxels (2,2,1) and (2,3,1)
  EXPECT_EQ(s.grid.neighbors(2, face12), (std::vector<label_t>{1, 2}));

  const label_t green = s.grid.query_label({4, 5, 2}).label;
  const label_t blue = s.grid.query_label({2, 3, 2}).label;
  ASSERT_NE(green, blue);
  std::set<std::pair<label_t, label_t>> green_pairs, blue_pairs;
  for (label_t f : s.grid.neighbors(1, green)) {
    const auto p = s.grid.neighbors(2, f);
    green_pairs.insert({p[0], p[1]});
  }
  for (label_t f : s.grid.neighbors(1, blue)) {
    const auto p = s.grid.neighbors(2, f);
    blue_pairs.insert({p[0], p[1]});
  }
  EXPECT_EQ(green_pairs, (std::set<std::pair<label_t, label_t>>{{1, 3}, {1, 4}, {3, 6}, {4, 6}}));
  EXPECT_EQ(blue_pairs, (std::set<std::pair<label_t, label_t>>{{1, 2}, {1, 4}, {2, 5}, {4, 5}}));
  EXPECT_THROW(s.grid.neighbors(1, 3), not_found_error);
  EXPECT_THROW(s.grid.neighbors(0, 1), not_found_error);
}

TEST(GeometryStore, CornerComponents) {
  auto s = corner_stores("geometry");
  EXPECT_EQ(s.geom.counts(), (std::array<label_t, 4>{0, 2, 7, 6}));
  EXPECT_EQ(s.geom.read_component(3, 1).size(), 7u);
  EXPECT_EQ(s.geom.read_component(3, 5), (std::vector<CellCoord>{{3, 3, 3}}));
  EXPECT_TRUE(s.geom.zero_cells().empty());

  const label_t blue = s.grid.query_label({2, 3, 2}).label;
  const auto cells = s.geom.read_component(1, blue);
  ASSERT_EQ(cells.size(), 4u);
  for (const auto& t : cells) {
    EXPECT_EQ(cell_order(t), 1);
    EXPECT_EQ(t.t3, 2);
  }
  EXPECT_THROW(s.geom.read_component(1, 3), not_found_error);
  EXPECT_THROW(s.geom.read_component(3, 7), not_found_error);
  EXPECT_TRUE(fs::exists(GeometryStore::fragment_path(s.dir / "geometry", 8, 3, 1, 0)));
}

TEST(GeometryStore, UniformVolumeHasOnlySegments) {
  const auto dir = support::scratch_dir("uniform");
  const SegmentLabelMap sigma(GridShape(4, 4, 4), 3);
  const BlockSpec spec(sigma.shape(), {3, 3, 3});
  GridStore grid = GridStore::create(dir / "grid", spec);
  extract_blockwise(sigma, spec, grid);
  const auto geom = write_geometry(grid, dir / "geometry", 4);
  EXPECT_EQ(geom.counts(), (std::array<label_t, 4>{0, 0, 0, 3}));
  EXPECT_EQ(geom.read_component(3, 3).size(), 64u);
  EXPECT_EQ(geom.parts(3, 3), 8u);
  EXPECT_EQ(geom.parts(3, 1), 0u);
  EXPECT_THROW(grid.neighbors(2, 1), not_found_error);
}

TEST(GridStore, StateErrors) {
  const auto dir = support::scratch_dir("state");
  const auto sigma = fixtures::corner_example();
  const BlockSpec spec(sigma.shape(), {2, 2, 2});
  GridStore grid = GridStore::create(dir / "grid", spec);
  EXPECT_THROW(grid.query_label({1, 1, 1}), state_error);
  EXPECT_THROW(write_geometry(grid, dir / "geometry"), state_error);
  EXPECT_THROW(GridStore::create(dir / "grid", spec), store_error);
  EXPECT_NO_THROW(GridStore::create(dir / "grid", spec, true));
  EXPECT_THROW(GridStore::open(dir / "nothing"), store_error);
  EXPECT_THROW(GeometryStore::open(dir / "grid"), store_error);
}

TEST(GridStore, ReopenedStoreMatchesLabeling) {
  const auto dir = support::scratch_dir("reopen");
  const auto sigma = fixtures::random_segments(GridShape(10, 8, 6), 15, 2);
  const BlockSpec spec(sigma.shape(), {4, 5, 3});
  GridStore grid = GridStore::create(dir / "grid", spec);
  const auto run = extract_blockwise(sigma, spec, grid);
  const GridStore back = GridStore::open(dir / "grid");
  EXPECT_EQ(back.labeling(), run.labeling);
  EXPECT_EQ(back.layout().size(), run.layout.size());
  for (std::size_t i = 0; i < run.layout.size(); ++i) EXPECT_EQ(back.load_summary(i), run.blocks[i]);
}
