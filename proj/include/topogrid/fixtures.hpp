#pragma once

// Bundled example volumes.

#include <cstdint>
#include <deque>
#include <random>
#include <vector>

#include "labeling.hpp"

namespace topogrid::fixtures {

// 3x3x2 volume with six segments: a column of segments 2/5 and a corner of
// segments 3/6 embedded in a background of 1 (lower layer) and 4 (upper
// layer). Block-wise processing with 2x2x2 blocks splits one curve and
// falsely activates one 0-cell unless curves are merged.
inline SegmentLabelMap corner_example() {
  // [r3][r1][r2]
  constexpr label_t layers[2][3][3] = {
      {{1, 1, 1}, {1, 2, 1}, {1, 1, 3}},
      {{4, 4, 4}, {4, 5, 4}, {4, 4, 6}},
  };
  SegmentLabelMap sigma(GridShape(3, 3, 2));
  for (coord_t r3 = 1; r3 <= 2; ++r3)
    for (coord_t r1 = 1; r1 <= 3; ++r1)
      for (coord_t r2 = 1; r2 <= 3; ++r2) sigma.set({r1, r2, r3}, layers[r3 - 1][r1 - 1][r2 - 1]);
  return sigma;
}

// Every voxel drawn independently from 1..num_labels. Segments are usually
// not connected; labeling treats each label as one segment anyway.
inline SegmentLabelMap random_labels(const GridShape& shape, label_t num_labels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<label_t> labels(shape.voxel_count());
  for (auto& l : labels) l = label_t(rng() % num_labels) + 1;
  return SegmentLabelMap(shape, std::move(labels));
}

// Connected segments grown by breadth-first search from `num_segments`
// random seed voxels (a 6-neighbor Voronoi partition).
inline SegmentLabelMap random_segments(const GridShape& shape, label_t num_segments, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = shape.voxel_count();
  const auto ext = shape.voxel_extents();
  std::vector<label_t> labels(n, 0);
  std::deque<std::size_t> queue;
  label_t next = 0;
  for (label_t s = 0; s < num_segments && next < n; ++s) {
    const std::size_t i = std::size_t(rng() % n);
    if (labels[i] != 0) continue;
    labels[i] = ++next;
    queue.push_back(i);
  }
  const std::size_t stride[3] = {1, std::size_t(ext[0]), std::size_t(ext[0]) * std::size_t(ext[1])};
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const coord_t r[3] = {coord_t(i % stride[1]), coord_t((i / stride[1]) % std::size_t(ext[1])),
                          coord_t(i / stride[2])};
    for (int a = 0; a < 3; ++a) {
      if (r[a] > 0 && labels[i - stride[a]] == 0) {
        labels[i - stride[a]] = labels[i];
        queue.push_back(i - stride[a]);
      }
      if (r[a] + 1 < ext[a] && labels[i + stride[a]] == 0) {
        labels[i + stride[a]] = labels[i];
        queue.push_back(i + stride[a]);
      }
    }
  }
  return SegmentLabelMap(shape, std::move(labels));
}

}  // namespace topogrid::fixtures
