#pragma once

#include <stdexcept>
#include <string>

namespace topogrid {

// Coordinate outside the voxel or topological grid.
struct bounds_error : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Label space exhausted while numbering components or computing offsets.
struct label_overflow_error : std::overflow_error {
  using std::overflow_error::overflow_error;
};

// Two blocks disagree about a shared cell. Indicates a bug, not bad input.
struct consistency_error : std::logic_error {
  using std::logic_error::logic_error;
};

// Operation not permitted in the store's current state (e.g. querying
// before finalization).
struct state_error : std::logic_error {
  using std::logic_error::logic_error;
};

struct not_found_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable on-disk records, or filesystem failures.
struct store_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace topogrid
