#pragma once

#include <cstdint>
#include <vector>

#include "ggssm/common.hpp"
#include "ggssm/mst.hpp"
#include "ggssm/threads.hpp"

namespace ggssm {

// Path-weight endpoint convention. edge_count multiplies one transition
// factor per edge traversed (exclude source, include destination), which
// makes a chain rooted at its endpoint reduce exactly to the 1-D
// recurrence. interior_only keeps the literal reading that multiplies only
// factors of nodes strictly between source and destination.
enum class PathConvention { edge_count, interior_only };

// Per-node diagonal transitions a (entries strictly inside (0, 1)) and
// per-node state injections u, both L x N.
struct ScanParams {
  Matrixd a;
  Matrixd u;

  uint32_t L() const { return a.rows(); }
  uint32_t N() const { return a.cols(); }
  void validate() const;
};

struct GradientBundle {
  Matrixd d_a;
  Matrixd d_u;
};

// Elementwise product of transitions along the unique j -> i path.
std::vector<double> path_weight(const RootedTree& tree, const Matrixd& a, uint32_t j,
                                uint32_t i,
                                PathConvention convention = PathConvention::edge_count);

// Literal O(L^2 N) evaluation of the all-nodes aggregation; the reference
// semantics for scan_full. Propagates every source's contribution over the
// undirected edge set, independent of the two-pass code paths below.
Matrixd scan_dense_oracle(const RootedTree& tree, const ScanParams& params,
                          PathConvention convention = PathConvention::edge_count);

// Causal subtree aggregation in one leaves-to-root pass:
//   h_i = u_i + a_i (*) sum_{c in children(i)} h_c        (edge_count)
Matrixd scan_rooted(const RootedTree& tree, const ScanParams& params,
                    PathConvention convention = PathConvention::edge_count,
                    Exec exec = Exec::omp);

// All-nodes aggregation in O(L N) by re-rooting dynamic programming:
// upward pass, then downward redistribution; equal to scan_dense_oracle up
// to floating-point tolerance and independent of the chosen root.
Matrixd scan_full(const RootedTree& tree, const ScanParams& params,
                  PathConvention convention = PathConvention::edge_count,
                  Exec exec = Exec::omp);

// Reverse-mode gradients of a scalar loss through scan_full, given
// grad_h = dLoss/dh. Linear time, matches central finite differences.
GradientBundle scan_full_backward(const RootedTree& tree, const ScanParams& params,
                                  const Matrixd& grad_h,
                                  PathConvention convention = PathConvention::edge_count,
                                  Exec exec = Exec::omp);

// Same for the rooted (subtree) scan.
GradientBundle scan_rooted_backward(const RootedTree& tree, const ScanParams& params,
                                    const Matrixd& grad_h,
                                    PathConvention convention = PathConvention::edge_count,
                                    Exec exec = Exec::omp);

// Eq.-1-style 1-D recurrence over nodes taken as a sequence:
//   h[0] = u[0];  h[n] = a[n] (*) h[n-1] + u[n]
Matrixd sequential_scan_1d(const ScanParams& params);
GradientBundle sequential_scan_1d_backward(const ScanParams& params, const Matrixd& grad_h);

// Single-precision production variant of the full scan (same algorithm,
// float storage); used where the caller keeps float tensors.
Matrixf scan_full_f32(const RootedTree& tree, const Matrix<float>& a, const Matrix<float>& u,
                      PathConvention convention = PathConvention::edge_count,
                      Exec exec = Exec::omp);

}  // namespace ggssm
