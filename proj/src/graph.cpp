#include "ggssm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ggssm/errors.hpp"
#include "ggssm/union_find.hpp"

namespace ggssm {

void FeatureSet::validate() const {
  if (L() < 1 || d_model() < 1) throw ContractError("FeatureSet needs L >= 1 and d_model >= 1");
  if (!data.all_finite()) throw InvalidInputError("FeatureSet contains non-finite entries");
}

void CandidateTopology::validate(uint32_t L) const {
  switch (kind) {
    case Kind::dense:
      return;
    case Kind::grid:
      if (static_cast<uint64_t>(grid_h) * grid_w != L)
        throw ConfigError("grid " + std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                          " does not cover L=" + std::to_string(L));
      if (connectivity != 4 && connectivity != 8)
        throw ConfigError("grid connectivity must be 4 or 8");
      return;
    case Kind::knn:
      if (k < 1 || k >= L)
        throw ConfigError("knn requires 1 <= k < L (k=" + std::to_string(k) +
                          ", L=" + std::to_string(L) + ")");
      return;
  }
  throw ConfigError("unknown topology kind");
}

std::string CandidateTopology::describe() const {
  switch (kind) {
    case Kind::dense:
      return "dense";
    case Kind::grid:
      return "grid(" + std::to_string(grid_h) + "x" + std::to_string(grid_w) + ",conn" +
             std::to_string(connectivity) + ")";
    case Kind::knn:
      return "knn(k=" + std::to_string(k) + ")";
  }
  return "?";
}

double cosine_dissimilarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ContractError("cosine_dissimilarity: length mismatch (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!std::isfinite(dot) || !std::isfinite(na) || !std::isfinite(nb))
    throw InvalidInputError("cosine_dissimilarity: non-finite input");
  return std::exp(-dot / (std::sqrt(na) * std::sqrt(nb) + kNormEpsilon));
}

namespace {

using Pair = std::pair<uint32_t, uint32_t>;

double pair_weight(const FeatureSet& f, uint32_t i, uint32_t j, const std::vector<double>& norm) {
  const double* a = f.data.row(i);
  const double* b = f.data.row(j);
  double dot = 0.0;
  for (uint32_t d = 0; d < f.d_model(); ++d) dot += a[d] * b[d];
  return std::exp(-dot / (norm[i] * norm[j] + kNormEpsilon));
}

std::vector<double> row_norms(const FeatureSet& f) {
  std::vector<double> n(f.L());
  for (uint32_t i = 0; i < f.L(); ++i) {
    double s = 0.0;
    const double* r = f.data.row(i);
    for (uint32_t d = 0; d < f.d_model(); ++d) s += r[d] * r[d];
    n[i] = std::sqrt(s);
  }
  return n;
}

std::vector<Pair> dense_pairs(uint32_t L) {
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<size_t>(L) * (L - 1) / 2);
  for (uint32_t u = 0; u + 1 < L; ++u)
    for (uint32_t v = u + 1; v < L; ++v) pairs.emplace_back(u, v);
  return pairs;
}

std::vector<Pair> grid_pairs(const CandidateTopology& t) {
  std::vector<Pair> pairs;
  auto at = [&](uint32_t r, uint32_t c) { return r * t.grid_w + c; };
  for (uint32_t r = 0; r < t.grid_h; ++r) {
    for (uint32_t c = 0; c < t.grid_w; ++c) {
      uint32_t u = at(r, c);
      if (c + 1 < t.grid_w) pairs.emplace_back(u, at(r, c + 1));
      if (r + 1 < t.grid_h) pairs.emplace_back(u, at(r + 1, c));
      if (t.connectivity == 8 && r + 1 < t.grid_h) {
        if (c + 1 < t.grid_w) pairs.emplace_back(u, at(r + 1, c + 1));
        if (c >= 1) pairs.emplace_back(std::min(u, at(r + 1, c - 1)),
                                       std::max(u, at(r + 1, c - 1)));
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

// Exact k nearest neighbors per node under the dissimilarity weight, ties
// broken by neighbor index, then symmetrized. If the result is
// disconnected, each round adds the lightest edge leaving every component
// until one component remains (the MST stage requires connectivity).
std::vector<Pair> knn_pairs(const FeatureSet& f, uint32_t k) {
  const uint32_t L = f.L();
  auto norm = row_norms(f);
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<size_t>(L) * k);

  std::vector<std::pair<double, uint32_t>> cand(L - 1);
#pragma omp parallel for schedule(dynamic, 32) firstprivate(cand)
  for (int64_t ii = 0; ii < static_cast<int64_t>(L); ++ii) {
    uint32_t i = static_cast<uint32_t>(ii);
    size_t m = 0;
    for (uint32_t j = 0; j < L; ++j) {
      if (j == i) continue;
      cand[m++] = {pair_weight(f, i, j, norm), j};
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    std::vector<Pair> mine(k);
    for (uint32_t t = 0; t < k; ++t) {
      uint32_t j = cand[t].second;
      mine[t] = {std::min(i, j), std::max(i, j)};
    }
#pragma omp critical
    pairs.insert(pairs.end(), mine.begin(), mine.end());
  }

  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  // Connectivity fallback, one lightest outgoing edge per component per round.
  UnionFind uf(L);
  for (const auto& [u, v] : pairs) uf.unite(u, v);
  while (uf.components() > 1) {
    struct Best {
      double w = std::numeric_limits<double>::infinity();
      uint32_t u = 0, v = 0;
      bool set = false;
    };
    std::vector<Best> best(L);
    for (uint32_t u = 0; u < L; ++u) {
      for (uint32_t v = u + 1; v < L; ++v) {
        uint32_t cu = uf.find(u), cv = uf.find(v);
        if (cu == cv) continue;
        double w = pair_weight(f, u, v, norm);
        for (uint32_t c : {cu, cv}) {
          Best& b = best[c];
          if (!b.set || w < b.w || (w == b.w && std::make_pair(u, v) < std::make_pair(b.u, b.v))) {
            b = {w, u, v, true};
          }
        }
      }
    }
    for (uint32_t c = 0; c < L; ++c) {
      if (!best[c].set) continue;
      if (uf.unite(best[c].u, best[c].v)) pairs.emplace_back(best[c].u, best[c].v);
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  }
  return pairs;
}

}  // namespace

std::vector<Pair> build_candidate_edges(const FeatureSet& features,
                                        const CandidateTopology& topology, uint32_t dense_cap) {
  features.validate();
  topology.validate(features.L());
  switch (topology.kind) {
    case CandidateTopology::Kind::dense:
      if (features.L() > dense_cap)
        throw ConfigError("dense topology capped at L <= " + std::to_string(dense_cap) +
                          "; use grid or knn for L=" + std::to_string(features.L()));
      return dense_pairs(features.L());
    case CandidateTopology::Kind::grid:
      return grid_pairs(topology);
    case CandidateTopology::Kind::knn:
      return knn_pairs(features, topology.k);
  }
  throw ConfigError("unknown topology kind");
}

std::vector<WeightedEdge> weigh_edges(const FeatureSet& features,
                                      std::span<const Pair> pairs, Exec exec) {
  const uint32_t L = features.L();
  for (const auto& [u, v] : pairs)
    if (u >= L || v >= L)
      throw ContractError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                          ") out of range for L=" + std::to_string(L));
  auto norm = row_norms(features);
  std::vector<WeightedEdge> edges(pairs.size());
  if (exec == Exec::omp) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(pairs.size()); ++i) {
      edges[i] = {pairs[i].first, pairs[i].second,
                  pair_weight(features, pairs[i].first, pairs[i].second, norm)};
    }
  } else {
    for (size_t i = 0; i < pairs.size(); ++i) {
      edges[i] = {pairs[i].first, pairs[i].second,
                  pair_weight(features, pairs[i].first, pairs[i].second, norm)};
    }
  }
  return edges;
}

}  // namespace ggssm
