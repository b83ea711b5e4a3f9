#include "ggssm/mst.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <queue>

#include <nlohmann/json.hpp>

#include "ggssm/errors.hpp"
#include "ggssm/soft_heap.hpp"
#include "ggssm/union_find.hpp"

namespace ggssm {
namespace {

void validate_edges(std::span<const WeightedEdge> edges, uint32_t L) {
  if (L < 1) throw ContractError("node count must be >= 1");
  for (const auto& e : edges) {
    if (!(e.u < e.v && e.v < L))
      throw ContractError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                          ") violates 0 <= u < v < L for L=" + std::to_string(L));
    if (!(std::isfinite(e.w) && e.w > 0.0))
      throw InvalidInputError("edge weight must be finite and positive");
  }
}

[[noreturn]] void throw_disconnected(UnionFind& uf, uint32_t L) {
  uint32_t r0 = uf.find(0);
  for (uint32_t i = 1; i < L; ++i)
    if (uf.find(i) != r0) throw DisconnectedError(0, i);
  throw DisconnectedError(0, 0);  // unreachable for consistent callers
}

SpanningTree finish_tree(std::vector<WeightedEdge> chosen, uint32_t L) {
  std::sort(chosen.begin(), chosen.end(),
            [](const WeightedEdge& a, const WeightedEdge& b) {
              return a.u != b.u ? a.u < b.u : a.v < b.v;
            });
  SpanningTree t;
  t.L = L;
  t.edges = std::move(chosen);
  t.total_weight = 0.0;
  for (const auto& e : t.edges) t.total_weight += e.w;
  return t;
}

// Composite key making every edge weight distinct; all tie-breaking flows
// through this order.
struct EdgeKey {
  double w;
  uint32_t u, v;
};
struct EdgeKeyLess {
  bool operator()(const EdgeKey& a, const EdgeKey& b) const {
    if (a.w != b.w) return a.w < b.w;
    if (a.u != b.u) return a.u < b.u;
    return a.v < b.v;
  }
};

SpanningTree kruskal_over(std::vector<WeightedEdge> sorted_or_not, uint32_t L,
                          bool check_connected) {
  std::sort(sorted_or_not.begin(), sorted_or_not.end(), edge_less);
  UnionFind uf(L);
  std::vector<WeightedEdge> chosen;
  chosen.reserve(L - 1);
  for (const auto& e : sorted_or_not) {
    if (uf.unite(e.u, e.v)) {
      chosen.push_back(e);
      if (chosen.size() == L - 1u) break;
    }
  }
  if (chosen.size() != L - 1u) {
    if (check_connected) throw_disconnected(uf, L);
    throw ContractError("internal: candidate set does not span");
  }
  return finish_tree(std::move(chosen), L);
}

}  // namespace

SpanningTree mst_kruskal(std::span<const WeightedEdge> edges, uint32_t L) {
  validate_edges(edges, L);
  if (L == 1) return finish_tree({}, 1);
  return kruskal_over({edges.begin(), edges.end()}, L, true);
}

SpanningTree mst_prim(std::span<const WeightedEdge> edges, uint32_t L) {
  validate_edges(edges, L);
  if (L == 1) return finish_tree({}, 1);

  // CSR adjacency.
  std::vector<uint32_t> deg(L + 1, 0);
  for (const auto& e : edges) {
    ++deg[e.u + 1];
    ++deg[e.v + 1];
  }
  for (uint32_t i = 0; i < L; ++i) deg[i + 1] += deg[i];
  struct Half {
    uint32_t to;
    uint32_t edge;
  };
  std::vector<Half> adj(2 * edges.size());
  {
    std::vector<uint32_t> cur(deg.begin(), deg.end() - 1);
    for (uint32_t idx = 0; idx < edges.size(); ++idx) {
      adj[cur[edges[idx].u]++] = {edges[idx].v, idx};
      adj[cur[edges[idx].v]++] = {edges[idx].u, idx};
    }
  }

  struct HeapEnt {
    EdgeKey key;
    uint32_t to;
    uint32_t edge;
  };
  auto heap_after = [](const HeapEnt& a, const HeapEnt& b) {
    return EdgeKeyLess{}(b.key, a.key);  // min-heap
  };
  std::priority_queue<HeapEnt, std::vector<HeapEnt>, decltype(heap_after)> heap(heap_after);
  std::vector<char> visited(L, 0);
  std::vector<WeightedEdge> chosen;
  chosen.reserve(L - 1);

  auto visit = [&](uint32_t node) {
    visited[node] = 1;
    for (uint32_t i = deg[node]; i < deg[node + 1]; ++i) {
      const auto& h = adj[i];
      if (!visited[h.to]) {
        const auto& e = edges[h.edge];
        heap.push({{e.w, e.u, e.v}, h.to, h.edge});
      }
    }
  };
  visit(0);
  while (!heap.empty() && chosen.size() < L - 1u) {
    HeapEnt top = heap.top();
    heap.pop();
    if (visited[top.to]) continue;  // lazy deletion
    chosen.push_back(edges[top.edge]);
    visit(top.to);
  }
  if (chosen.size() != L - 1u) {
    UnionFind uf(L);
    for (const auto& e : chosen) uf.unite(e.u, e.v);
    throw_disconnected(uf, L);
  }
  return finish_tree(std::move(chosen), L);
}

namespace {

// Binary-lifting path-maximum certificate over a candidate tree. Returns
// the first input edge (by canonical order) that beats the maximum edge on
// its tree path, or -1 when the tree is certified minimal.
class PathMaxCertifier {
 public:
  PathMaxCertifier(const SpanningTree& tree) : L_(tree.L) {
    levels_ = 1;
    while ((1u << levels_) < L_) ++levels_;
    parent_.assign(levels_, std::vector<int64_t>(L_, -1));
    maxe_.assign(levels_, std::vector<EdgeKey>(L_, EdgeKey{0.0, 0, 0}));
    depth_.assign(L_, 0);

    std::vector<std::vector<std::pair<uint32_t, EdgeKey>>> adj(L_);
    for (const auto& e : tree.edges) {
      adj[e.u].push_back({e.v, {e.w, e.u, e.v}});
      adj[e.v].push_back({e.u, {e.w, e.u, e.v}});
    }
    std::vector<uint32_t> stack = {0};
    std::vector<char> seen(L_, 0);
    seen[0] = 1;
    while (!stack.empty()) {
      uint32_t x = stack.back();
      stack.pop_back();
      for (const auto& [to, key] : adj[x]) {
        if (seen[to]) continue;
        seen[to] = 1;
        parent_[0][to] = x;
        maxe_[0][to] = key;
        depth_[to] = depth_[x] + 1;
        stack.push_back(to);
      }
    }
    for (uint32_t k = 1; k < levels_; ++k) {
      for (uint32_t i = 0; i < L_; ++i) {
        int64_t mid = parent_[k - 1][i];
        if (mid < 0) continue;
        parent_[k][i] = parent_[k - 1][mid];
        maxe_[k][i] = key_max(maxe_[k - 1][i], maxe_[k - 1][mid]);
      }
    }
  }

  EdgeKey path_max(uint32_t u, uint32_t v) const {
    EdgeKey best{0.0, 0, 0};
    bool has = false;
    auto lift = [&](uint32_t& x, uint32_t upby) {
      for (uint32_t k = 0; upby; ++k, upby >>= 1) {
        if (upby & 1) {
          best = has ? key_max(best, maxe_[k][x]) : maxe_[k][x];
          has = true;
          x = static_cast<uint32_t>(parent_[k][x]);
        }
      }
    };
    if (depth_[u] < depth_[v]) std::swap(u, v);
    lift(u, depth_[u] - depth_[v]);
    if (u == v) return best;
    for (int64_t k = levels_ - 1; k >= 0; --k) {
      if (parent_[k][u] != parent_[k][v]) {
        best = has ? key_max(best, maxe_[k][u]) : maxe_[k][u];
        best = key_max(best, maxe_[k][v]);
        has = true;
        u = static_cast<uint32_t>(parent_[k][u]);
        v = static_cast<uint32_t>(parent_[k][v]);
      }
    }
    best = has ? key_max(best, maxe_[0][u]) : maxe_[0][u];
    best = key_max(best, maxe_[0][v]);
    return best;
  }

 private:
  static EdgeKey key_max(const EdgeKey& a, const EdgeKey& b) {
    return EdgeKeyLess{}(a, b) ? b : a;
  }
  uint32_t L_;
  uint32_t levels_;
  std::vector<std::vector<int64_t>> parent_;
  std::vector<std::vector<EdgeKey>> maxe_;
  std::vector<uint32_t> depth_;
};

}  // namespace

SpanningTree mst_boruvka_soft(std::span<const WeightedEdge> edges, uint32_t L, double epsilon) {
  BoruvkaSoftOptions opts;
  opts.epsilon = epsilon;
  return mst_boruvka_soft(edges, L, opts);
}

SpanningTree mst_boruvka_soft(std::span<const WeightedEdge> edges, uint32_t L,
                              const BoruvkaSoftOptions& opts) {
  if (!(opts.epsilon > 0.0 && opts.epsilon <= 0.25))
    throw ConfigError("boruvka_soft epsilon must lie in (0, 1/4]");
  validate_edges(edges, L);
  if (L == 1) return finish_tree({}, 1);

  UnionFind uf(L);
  std::vector<WeightedEdge> candidates;  // grows: exact round, selections, pool
  candidates.reserve(2 * L);

  // One exact Boruvka round: every node grabs its lightest incident edge
  // under the canonical order. These edges belong to the MST by the cut
  // property, so contracting them is always safe.
  {
    constexpr uint32_t kNone = 0xFFFFFFFFu;
    std::vector<uint32_t> best(L, kNone);
    for (uint32_t idx = 0; idx < edges.size(); ++idx) {
      const auto& e = edges[idx];
      for (uint32_t end : {e.u, e.v}) {
        if (best[end] == kNone || edge_less(e, edges[best[end]])) best[end] = idx;
      }
    }
    for (uint32_t i = 0; i < L; ++i) {
      if (best[i] == kNone) continue;
      const auto& e = edges[best[i]];
      if (uf.unite(e.u, e.v)) candidates.push_back(e);
    }
  }

  // Soft-heap phase: remaining inter-component edges are extracted in
  // nondecreasing perceived-key order and fed through union-find. Keys only
  // rise, so uncorrupted discards are justified by the cycle property;
  // everything discarded under a corrupted key joins the repair pool.
  if (uf.components() > 1) {
    SoftHeap<EdgeKey, uint32_t, EdgeKeyLess> heap(opts.epsilon);
    for (uint32_t idx = 0; idx < edges.size(); ++idx) {
      const auto& e = edges[idx];
      if (uf.find(e.u) != uf.find(e.v)) heap.insert({e.w, e.u, e.v}, idx);
    }
    while (uf.components() > 1 && !heap.empty()) {
      auto ext = heap.extract_min();
      const auto& e = edges[ext.payload];
      if (uf.unite(e.u, e.v)) {
        candidates.push_back(e);
      } else if (ext.was_corrupted) {
        candidates.push_back(e);
      }
    }
    if (uf.components() > 1) throw_disconnected(uf, L);
    // Items still inside the heap were never compared under their true
    // keys; the corrupted ones among them also go to the repair pool.
    heap.for_each_item([&](uint32_t idx, const EdgeKey&, bool corrupted) {
      if (corrupted) candidates.push_back(edges[idx]);
    });
  }

  // Verification pass: an exact Kruskal over selections plus the corrupted
  // pool re-checks every edge chosen under a raised key against true keys
  // and repairs suboptimal picks. The result equals the canonical MST.
  std::sort(candidates.begin(), candidates.end(), edge_less);
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  SpanningTree tree = kruskal_over(std::move(candidates), L, false);

  if (opts.certify) {
    // Path-maximum certificate over all input edges, with exchange repair.
    // The verification pass above already guarantees minimality; this
    // independently proves it for the returned tree.
    for (bool again = true; again;) {
      again = false;
      PathMaxCertifier cert(tree);
      std::vector<uint64_t> in_tree;
      in_tree.reserve(tree.edges.size());
      for (const auto& te : tree.edges)
        in_tree.push_back(static_cast<uint64_t>(te.u) << 32 | te.v);
      std::sort(in_tree.begin(), in_tree.end());
      for (const auto& e : edges) {
        uint64_t key = static_cast<uint64_t>(e.u) << 32 | e.v;
        if (std::binary_search(in_tree.begin(), in_tree.end(), key)) continue;
        EdgeKey mk = cert.path_max(e.u, e.v);
        if (EdgeKeyLess{}(EdgeKey{e.w, e.u, e.v}, mk)) {
          std::vector<WeightedEdge> repaired;
          repaired.reserve(tree.edges.size());
          for (const auto& te : tree.edges)
            if (!(te.w == mk.w && te.u == mk.u && te.v == mk.v)) repaired.push_back(te);
          repaired.push_back(e);
          tree = finish_tree(std::move(repaired), L);
          again = true;
          break;
        }
      }
    }
  }
  return tree;
}

SpanningTree mst_bruteforce(std::span<const WeightedEdge> edges, uint32_t L) {
  if (L > 8)
    throw OracleSizeError("mst_bruteforce enumerates spanning trees only up to L=8, got L=" +
                          std::to_string(L));
  validate_edges(edges, L);
  if (L == 1) return finish_tree({}, 1);

  std::vector<WeightedEdge> sorted(edges.begin(), edges.end());
  std::sort(sorted.begin(), sorted.end(), edge_less);

  double best_total = std::numeric_limits<double>::infinity();
  std::vector<uint32_t> best_pick;
  std::vector<uint32_t> pick;
  pick.reserve(L - 1);

  // Enumerates index-increasing edge subsets; the first completed minimum
  // stays, which matches the canonical greedy tie-break.
  auto rec = [&](auto&& self, uint32_t start, UnionFind uf, double total) -> void {
    if (pick.size() == L - 1u) {
      if (total < best_total) {
        best_total = total;
        best_pick = pick;
      }
      return;
    }
    uint32_t needed = L - 1u - static_cast<uint32_t>(pick.size());
    if (start + needed > sorted.size()) return;
    if (total >= best_total) return;
    for (uint32_t i = start; i + needed <= sorted.size(); ++i) {
      UnionFind next = uf;
      if (!next.unite(sorted[i].u, sorted[i].v)) continue;
      if (total + sorted[i].w >= best_total) continue;
      pick.push_back(i);
      self(self, i + 1, std::move(next), total + sorted[i].w);
      pick.pop_back();
    }
  };
  rec(rec, 0, UnionFind(L), 0.0);

  if (best_pick.empty() && L > 1) {
    UnionFind uf(L);
    for (const auto& e : sorted) uf.unite(e.u, e.v);
    throw_disconnected(uf, L);
  }
  std::vector<WeightedEdge> chosen;
  chosen.reserve(best_pick.size());
  for (uint32_t i : best_pick) chosen.push_back(sorted[i]);
  return finish_tree(std::move(chosen), L);
}

RootedTree root_tree(const SpanningTree& tree, uint32_t root) {
  const uint32_t L = tree.L;
  if (root >= L) throw ContractError("root " + std::to_string(root) + " out of range for L=" +
                                     std::to_string(L));
  if (tree.edges.size() != L - 1u)
    throw ContractError("spanning tree must carry exactly L-1 edges");

  std::vector<std::vector<uint32_t>> adj(L);
  for (const auto& e : tree.edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());

  RootedTree rt;
  rt.L = L;
  rt.root = root;
  rt.parent.assign(L, RootedTree::kNoParent);
  rt.children.assign(L, {});
  rt.depth.assign(L, 0);
  rt.order.reserve(L);

  std::vector<char> seen(L, 0);
  std::vector<uint32_t> queue = {root};
  seen[root] = 1;
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    uint32_t x = queue[qi];
    rt.order.push_back(x);
    for (uint32_t to : adj[x]) {
      if (seen[to]) continue;
      seen[to] = 1;
      rt.parent[to] = x;
      rt.depth[to] = rt.depth[x] + 1;
      rt.children[x].push_back(to);
      queue.push_back(to);
    }
  }
  if (rt.order.size() != L)
    throw ContractError("spanning tree edge set is not connected");
  return rt;
}

std::string tree_to_json(const SpanningTree& tree, uint32_t root) {
  char buf[64];
  std::string out;
  out.reserve(64 + tree.edges.size() * 48);
  auto num17 = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out += buf;
  };
  out += "{\n  \"schema_version\": 1,\n  \"L\": ";
  out += std::to_string(tree.L);
  out += ",\n  \"root\": ";
  out += std::to_string(root);
  out += ",\n  \"total_weight\": ";
  num17(tree.total_weight);
  out += ",\n  \"edges\": [";
  for (size_t i = 0; i < tree.edges.size(); ++i) {
    out += i ? ",\n    [" : "\n    [";
    out += std::to_string(tree.edges[i].u);
    out += ", ";
    out += std::to_string(tree.edges[i].v);
    out += ", ";
    num17(tree.edges[i].w);
    out += "]";
  }
  out += tree.edges.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

TreeDocument tree_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("tree document is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("schema_version").get<int>() != 1)
      throw IoError("unsupported tree document schema_version");
    TreeDocument doc;
    doc.tree.L = j.at("L").get<uint32_t>();
    doc.root = j.at("root").get<uint32_t>();
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 3) throw IoError("tree edge must be [u, v, w]");
      doc.tree.edges.push_back(
          {e[0].get<uint32_t>(), e[1].get<uint32_t>(), e[2].get<double>()});
    }
    validate_edges(doc.tree.edges, doc.tree.L);
    if (doc.tree.edges.size() != doc.tree.L - 1u)
      throw IoError("tree document must carry exactly L-1 edges");
    if (doc.root >= doc.tree.L) throw IoError("tree document root out of range");
    UnionFind uf(doc.tree.L);
    for (const auto& e : doc.tree.edges) uf.unite(e.u, e.v);
    if (uf.components() != 1) throw IoError("tree document edges do not span");
    doc.tree.total_weight = 0.0;
    std::vector<WeightedEdge> canon = doc.tree.edges;
    std::sort(canon.begin(), canon.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
      return a.u != b.u ? a.u < b.u : a.v < b.v;
    });
    doc.tree.edges = std::move(canon);
    for (const auto& e : doc.tree.edges) doc.tree.total_weight += e.w;
    double declared = j.at("total_weight").get<double>();
    if (declared != doc.tree.total_weight)
      throw IoError("tree document total_weight does not match its edges");
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed tree document: ") + e.what());
  }
}

}  // namespace ggssm
