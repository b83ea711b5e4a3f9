#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ggssm/common.hpp"
#include "ggssm/threads.hpp"

namespace ggssm {

// Guards the cosine denominator so zero rows stay legal inputs. Two zero
// rows get cosine 0 and edge weight 1.
inline constexpr double kNormEpsilon = 1e-12;

// Dense candidate graphs are quadratic in L; larger inputs must use grid or
// knn. The cap is configurable per call.
inline constexpr uint32_t kDefaultDenseCap = 4096;

// L feature rows of dimension d_model; the nodes of the candidate graph.
struct FeatureSet {
  Matrixd data;

  uint32_t L() const { return data.rows(); }
  uint32_t d_model() const { return data.cols(); }

  // L >= 1, d_model >= 1, all entries finite.
  void validate() const;
};

struct CandidateTopology {
  enum class Kind { dense, grid, knn };
  Kind kind = Kind::dense;
  uint32_t grid_h = 0;
  uint32_t grid_w = 0;
  uint32_t connectivity = 4;  // 4 or 8
  uint32_t k = 0;

  static CandidateTopology dense() { return {}; }
  static CandidateTopology grid(uint32_t h, uint32_t w, uint32_t conn = 4) {
    return {Kind::grid, h, w, conn, 0};
  }
  static CandidateTopology knn(uint32_t k) { return {Kind::knn, 0, 0, 4, k}; }

  void validate(uint32_t L) const;
  std::string describe() const;
};

// Undirected edge with canonical ordering u < v.
struct WeightedEdge {
  uint32_t u = 0;
  uint32_t v = 0;
  double w = 0.0;

  friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

// Canonical edge order shared by every MST algorithm: (w, u, v)
// lexicographic. Duplicate weights from Eq.-style exp(-cos) maps stay
// deterministic under this comparator.
inline bool edge_less(const WeightedEdge& a, const WeightedEdge& b) {
  if (a.w != b.w) return a.w < b.w;
  if (a.u != b.u) return a.u < b.u;
  return a.v < b.v;
}

// exp(-<a,b> / (|a||b| + eps)); range (1/e, e] up to the epsilon guard.
double cosine_dissimilarity(std::span<const double> a, std::span<const double> b);

// Candidate (u, v) pairs for the requested topology, canonically ordered,
// duplicate free. knn graphs are symmetrized and, if disconnected, augmented
// with the lightest inter-component edge per round until connected.
std::vector<std::pair<uint32_t, uint32_t>> build_candidate_edges(
    const FeatureSet& features, const CandidateTopology& topology,
    uint32_t dense_cap = kDefaultDenseCap);

// Maps each pair through cosine_dissimilarity of its feature rows. Output
// order matches input order, so the parallel path is deterministic.
std::vector<WeightedEdge> weigh_edges(const FeatureSet& features,
                                      std::span<const std::pair<uint32_t, uint32_t>> pairs,
                                      Exec exec = Exec::omp);

}  // namespace ggssm
