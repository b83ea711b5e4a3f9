#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ggssm/graph.hpp"

namespace ggssm {

// Minimum spanning tree over L nodes: exactly L-1 edges, stored in
// canonical (u, v) order so every algorithm yields a bit-identical
// representation of the same tree. total_weight sums the edges in that
// fixed order.
struct SpanningTree {
  uint32_t L = 0;
  std::vector<WeightedEdge> edges;
  double total_weight = 0.0;
};

// Rooted traversal structure: parent (root -> kNoParent), children lists in
// ascending node order, and a topological order with parents before
// children.
struct RootedTree {
  static constexpr int64_t kNoParent = -1;

  uint32_t L = 0;
  uint32_t root = 0;
  std::vector<int64_t> parent;
  std::vector<std::vector<uint32_t>> children;
  std::vector<uint32_t> order;
  std::vector<uint32_t> depth;
};

SpanningTree mst_kruskal(std::span<const WeightedEdge> edges, uint32_t L);

// Exact binary-heap Prim; the exact-selection control in the ablation.
SpanningTree mst_prim(std::span<const WeightedEdge> edges, uint32_t L);

struct BoruvkaSoftOptions {
  double epsilon = 0.125;  // must lie in (0, 1/4]
  // When set, runs the path-maximum certificate over every input edge after
  // the corruption-repair pass and applies exchange repairs on violation.
  bool certify = false;
};

// Near-linear MST: one exact Boruvka round, then soft-heap-ordered
// selection, then a verification pass that re-checks edges chosen under
// corrupted keys against their true keys and repairs any suboptimal pick.
// The result always equals the canonical exact MST.
SpanningTree mst_boruvka_soft(std::span<const WeightedEdge> edges, uint32_t L,
                              double epsilon = 0.125);
SpanningTree mst_boruvka_soft(std::span<const WeightedEdge> edges, uint32_t L,
                              const BoruvkaSoftOptions& opts);

// Exhaustive test oracle, L <= 8 only.
SpanningTree mst_bruteforce(std::span<const WeightedEdge> edges, uint32_t L);

RootedTree root_tree(const SpanningTree& tree, uint32_t root);

// Structured text document with fields schema_version, L, root,
// total_weight and edges as [u, v, w]; weights carry 17 significant digits
// so parsing reproduces the doubles bit-exactly.
std::string tree_to_json(const SpanningTree& tree, uint32_t root);
struct TreeDocument {
  SpanningTree tree;
  uint32_t root = 0;
};
TreeDocument tree_from_json(const std::string& text);

}  // namespace ggssm
