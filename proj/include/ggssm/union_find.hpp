#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

namespace ggssm {

// Disjoint sets with path compression and union by rank.
class UnionFind {
 public:
  explicit UnionFind(uint32_t n) : parent_(n), rank_(n, 0), components_(n) {
    std::iota(parent_.begin(), parent_.end(), 0u);
  }

  uint32_t find(uint32_t x) {
    uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      uint32_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  // Returns false when x and y were already in the same set.
  bool unite(uint32_t x, uint32_t y) {
    uint32_t rx = find(x), ry = find(y);
    if (rx == ry) return false;
    if (rank_[rx] < rank_[ry]) std::swap(rx, ry);
    parent_[ry] = rx;
    if (rank_[rx] == rank_[ry]) ++rank_[rx];
    --components_;
    return true;
  }

  bool same(uint32_t x, uint32_t y) { return find(x) == find(y); }
  uint32_t components() const { return components_; }
  uint32_t size() const { return static_cast<uint32_t>(parent_.size()); }

 private:
  std::vector<uint32_t> parent_;
  std::vector<uint8_t> rank_;
  uint32_t components_;
};

}  // namespace ggssm
