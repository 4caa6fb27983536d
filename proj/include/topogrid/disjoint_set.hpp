#pragma once

#include <cstddef>
#include <numeric>
#include <sstream>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace topogrid {

// Union-find over labels 1..size with union by size and path compression.
// Label 0 is a fixed point and may not be united.
class DisjointSet {
 public:
  DisjointSet() : parent_(1, 0), size_(1, 1) {}
  explicit DisjointSet(label_t size) : parent_(std::size_t(size) + 1), size_(std::size_t(size) + 1, 1) {
    std::iota(parent_.begin(), parent_.end(), label_t{0});
  }

  label_t size() const { return label_t(parent_.size() - 1); }

  label_t find(label_t x) {
    check(x);
    label_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const label_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  // Returns true if a and b were in different sets.
  bool unite(label_t a, label_t b) {
    if (a == 0 || b == 0) throw std::invalid_argument("DisjointSet: label 0 cannot be united");
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    return true;
  }

  bool same(label_t a, label_t b) { return find(a) == find(b); }

 private:
  void check(label_t x) const {
    if (x >= parent_.size()) {
      std::ostringstream msg;
      msg << "label " << x << " outside disjoint set of size " << size();
      throw bounds_error(msg.str());
    }
  }

  std::vector<label_t> parent_;
  std::vector<label_t> size_;
};

}  // namespace topogrid
