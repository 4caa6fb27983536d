// Command-line front end: extract, geometry, query, component, neighbors,
// stats, verify, fixture.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "topogrid/topogrid.hpp"

namespace fs = std::filesystem;
using namespace topogrid;

namespace {

unsigned default_workers() {
  if (const char* env = std::getenv("TOPOGRID_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return unsigned(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::uint32_t default_bins() {
  if (const char* env = std::getenv("TOPOGRID_BINS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return std::uint32_t(v);
  }
  return kDefaultBins;
}

struct InputOptions {
  std::string path;
  std::vector<coord_t> shape;
  int element_width = 4;

  VolumeFile open() const {
    if (shape.empty()) return VolumeFile::open_array(path);
    return VolumeFile::open_raw(path, GridShape(shape[0], shape[1], shape[2]), element_width);
  }
};

void add_input(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("input", in.path, "Segmentation: array record, or raw 32-bit labels with --shape")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--shape", in.shape, "Voxel extents n1 n2 n3 of a raw input file")->expected(3);
  cmd->add_option("--element-width", in.element_width, "Bytes per label in a raw input file")
      ->check(CLI::IsMember({4}));
}

std::uintmax_t directory_bytes(const fs::path& root) {
  std::uintmax_t total = 0;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) total += e.file_size();
  return total;
}

void print_counts(const std::array<label_t, 4>& k) {
  std::cout << "segments=" << k[3] << "\nfaces=" << k[2] << "\ncurves=" << k[1] << "\npoints=" << k[0] << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extract faces, curves and points from 3D segmentations, block by block"};
  app.require_subcommand(1);

  // extract
  InputOptions ex_in;
  std::vector<coord_t> ex_blocks;
  std::string ex_out;
  unsigned ex_workers = default_workers();
  bool ex_force = false, ex_skip = false, ex_validate = false;
  auto* extract = app.add_subcommand("extract", "Label the topological grid block-wise into a grid store");
  add_input(extract, ex_in);
  extract->add_option("--blocks", ex_blocks, "Block extents b1 b2 b3 in voxels, including the shared layer")
      ->expected(3)
      ->required();
  extract->add_option("--out", ex_out, "Grid store directory")->required();
  extract->add_option("--workers", ex_workers, "Parallel block workers (env TOPOGRID_WORKERS)")
      ->check(CLI::PositiveNumber);
  extract->add_flag("--force", ex_force, "Overwrite an existing store");
  extract->add_flag("--skip-step-4", ex_skip,
                    "DANGEROUS: skip curve merging; output is wrong whenever curves cross blocks");
  extract->add_flag("--validate", ex_validate, "Report segment labels whose voxels are not connected");

  // geometry
  std::string geo_grid, geo_out;
  std::uint32_t geo_bins = default_bins();
  bool geo_force = false;
  auto* geometry = app.add_subcommand("geometry", "Write per-component coordinate lists from a grid store");
  geometry->add_option("grid", geo_grid, "Finalized grid store")->required()->check(CLI::ExistingDirectory);
  geometry->add_option("--out", geo_out, "Geometry store directory")->required();
  geometry->add_option("--bins", geo_bins, "Sub-directories per component order (env TOPOGRID_BINS)")
      ->check(CLI::PositiveNumber);
  geometry->add_flag("--force", geo_force, "Overwrite an existing store");

  // query
  std::string q_grid;
  std::vector<coord_t> q_cell;
  auto* query = app.add_subcommand("query", "Print order and global label of one cell");
  query->add_option("grid", q_grid, "Finalized grid store")->required()->check(CLI::ExistingDirectory);
  query->add_option("cell", q_cell, "Topological coordinates t1 t2 t3 (1-based)")->expected(3)->required();

  // component
  std::string c_geom;
  int c_order = 0;
  label_t c_label = 0;
  auto* component = app.add_subcommand("component", "Print the cells of one component");
  component->add_option("geometry", c_geom, "Geometry store")->required()->check(CLI::ExistingDirectory);
  component->add_option("order", c_order, "Cell order 0..3")->required()->check(CLI::Range(0, 3));
  component->add_option("label", c_label, "Global component label")->required();

  // neighbors
  std::string n_grid;
  int n_order = 0;
  label_t n_label = 0;
  auto* neighbors_cmd = app.add_subcommand("neighbors", "Print the components bounded by one component");
  neighbors_cmd->add_option("grid", n_grid, "Finalized grid store")->required()->check(CLI::ExistingDirectory);
  neighbors_cmd->add_option("order", n_order, "Cell order 0..2")->required()->check(CLI::Range(0, 2));
  neighbors_cmd->add_option("label", n_label, "Global component label")->required();

  // stats
  std::string s_grid, s_geom;
  auto* stats = app.add_subcommand("stats", "Print component counts and store sizes");
  stats->add_option("grid", s_grid, "Grid store")->required()->check(CLI::ExistingDirectory);
  stats->add_option("--geometry", s_geom, "Geometry store")->check(CLI::ExistingDirectory);

  // verify
  InputOptions v_in;
  std::vector<coord_t> v_blocks;
  bool v_skip = false;
  auto* verify = app.add_subcommand("verify", "Compare block-wise against whole-volume labeling (small inputs)");
  add_input(verify, v_in);
  verify->add_option("--blocks", v_blocks, "Block extents b1 b2 b3")->expected(3)->required();
  verify->add_flag("--skip-step-4", v_skip, "DANGEROUS: skip curve merging in the block-wise run");

  // fixture
  std::string f_name, f_out;
  coord_t f_size = 50;
  label_t f_segments = 100;
  std::uint64_t f_seed = 1;
  auto* fixture = app.add_subcommand("fixture", "Write a bundled example segmentation");
  fixture->add_option("name", f_name, "corner (3x3x2 example) or random (connected random segments)")
      ->required()
      ->check(CLI::IsMember({"corner", "random"}));
  fixture->add_option("--out", f_out, "Output array file")->required();
  fixture->add_option("--size", f_size, "Voxels per axis for random")->check(CLI::PositiveNumber);
  fixture->add_option("--segments", f_segments, "Number of segments for random")->check(CLI::PositiveNumber);
  fixture->add_option("--seed", f_seed, "Random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*extract) {
      const VolumeFile volume = ex_in.open();
      const BlockSpec spec(volume.shape(), {ex_blocks[0], ex_blocks[1], ex_blocks[2]});
      if (ex_validate) {
        const auto bad = find_disconnected_segments(volume.read_all());
        for (label_t l : bad) std::cerr << "warning: segment " << l << " is not connected\n";
      }
      GridStore grid = GridStore::create(ex_out, spec, ex_force);
      PipelineOptions options;
      options.workers = ex_workers;
      options.merge_curves = !ex_skip;
      if (ex_skip) std::cerr << "warning: curve merging skipped; the output is not a correct labeling\n";
      const PipelineResult result = extract_blockwise(volume, spec, grid, options);
      std::cout << "blocks=" << result.layout.size() << '\n';
      print_counts(result.labeling.counts);
      const auto& t = result.timings;
      std::cerr << "time: blocks " << t.blocks << "s, offsets " << t.offsets << "s, reconcile " << t.reconcile
                << "s, merge " << t.merge << "s, finalize " << t.finalize << "s\n";
      return 0;
    }

    if (*geometry) {
      const GridStore grid = GridStore::open(geo_grid);
      const GeometryStore geom = write_geometry(grid, geo_out, geo_bins, geo_force);
      print_counts(geom.counts());
      return 0;
    }

    if (*query) {
      const GridStore grid = GridStore::open(q_grid);
      const CellLabel l = grid.query_label({q_cell[0], q_cell[1], q_cell[2]});
      std::cout << "order=" << l.order << " label=" << l.label << '\n';
      return 0;
    }

    if (*component) {
      const GeometryStore geom = GeometryStore::open(c_geom);
      std::vector<CellCoord> cells;
      if (c_order == 0) {
        const auto zeros = geom.zero_cells();
        if (c_label == 0 || c_label > zeros.size())
          throw not_found_error("no 0-component with label " + std::to_string(c_label));
        cells.push_back(zeros[c_label - 1]);
      } else {
        cells = geom.read_component(c_order, c_label);
      }
      for (const auto& t : cells) std::cout << t.t1 << ' ' << t.t2 << ' ' << t.t3 << '\n';
      return 0;
    }

    if (*neighbors_cmd) {
      const GridStore grid = GridStore::open(n_grid);
      const auto labels = grid.neighbors(n_order, n_label);
      for (std::size_t i = 0; i < labels.size(); ++i) std::cout << (i ? " " : "") << labels[i];
      std::cout << '\n';
      return 0;
    }

    if (*stats) {
      const GridStore grid = GridStore::open(s_grid);
      const auto& v = grid.spec().volume();
      const auto& b = grid.spec().block();
      std::cout << "volume-shape=" << v.voxels(0) << ' ' << v.voxels(1) << ' ' << v.voxels(2) << '\n'
                << "block-shape=" << b[0] << ' ' << b[1] << ' ' << b[2] << '\n'
                << "blocks=" << grid.layout().size() << '\n'
                << "finalized=" << (grid.finalized() ? "yes" : "no") << '\n';
      if (grid.finalized()) print_counts(grid.counts());
      std::cout << "grid-bytes=" << directory_bytes(grid.root()) << '\n';
      if (!s_geom.empty()) std::cout << "geometry-bytes=" << directory_bytes(s_geom) << '\n';
      return 0;
    }

    if (*verify) {
      const SegmentLabelMap sigma = v_in.open().read_all();
      PipelineOptions options;
      options.merge_curves = !v_skip;
      const IsomorphismReport report =
          verify_pipeline(sigma, BlockSpec(sigma.shape(), {v_blocks[0], v_blocks[1], v_blocks[2]}), options);
      std::cout << report << '\n';
      static const char* names[] = {"points", "curves", "faces", "segments"};
      for (int c = 3; c >= 0; --c)
        std::cout << names[c] << '=' << report.counts[c].first << ' ' << report.counts[c].second << '\n';
      return report.isomorphic ? 0 : 1;
    }

    if (*fixture) {
      const SegmentLabelMap sigma = f_name == "corner"
                                        ? fixtures::corner_example()
                                        : fixtures::random_segments(GridShape(f_size, f_size, f_size), f_segments, f_seed);
      if (fs::exists(f_out)) throw store_error(f_out + ": already exists");
      write_segmentation(f_out, sigma);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
