#include "ggssm/scan.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ggssm/errors.hpp"

namespace ggssm {
namespace {

// Splits the channel dimension into one contiguous block per worker. Each
// channel's arithmetic runs in the same order regardless of the thread
// count, so serial and parallel results are bit-identical.
template <class Fn>
void for_channel_blocks(uint32_t N, Exec exec, Fn&& fn) {
  if (exec == Exec::serial || N == 1) {
    fn(0u, N);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel
  {
    uint32_t nt = static_cast<uint32_t>(omp_get_num_threads());
    uint32_t t = static_cast<uint32_t>(omp_get_thread_num());
    uint32_t per = (N + nt - 1) / nt;
    uint32_t c0 = std::min(N, t * per);
    uint32_t c1 = std::min(N, c0 + per);
    if (c0 < c1) fn(c0, c1);
  }
#else
  fn(0u, N);
#endif
}

template <class T>
void check_tree_params(const RootedTree& tree, const Matrix<T>& a, const Matrix<T>& u) {
  if (a.rows() != tree.L || u.rows() != tree.L || a.cols() != u.cols())
    throw ContractError("scan parameter shapes do not match the tree");
}

// Upward pass: up_i = u_i + a_i (*) sum of children's up. csum keeps the
// raw child sums for the backward pass.
template <class T>
void pass_up(const RootedTree& tree, const Matrix<T>& a, const Matrix<T>& u, Matrix<T>& up,
             Matrix<T>* csum, uint32_t c0, uint32_t c1) {
  const uint32_t L = tree.L;
  for (uint32_t idx = L; idx-- > 0;) {
    uint32_t i = tree.order[idx];
    T* upi = up.row(i);
    const T* ui = u.row(i);
    const T* ai = a.row(i);
    const auto& ch = tree.children[i];
    if (ch.empty()) {
      for (uint32_t c = c0; c < c1; ++c) upi[c] = ui[c];
      if (csum)
        for (uint32_t c = c0; c < c1; ++c) (*csum)(i, c) = T(0);
      continue;
    }
    for (uint32_t c = c0; c < c1; ++c) upi[c] = T(0);
    for (uint32_t child : ch) {
      const T* upc = up.row(child);
      for (uint32_t c = c0; c < c1; ++c) upi[c] += upc[c];
    }
    if (csum)
      for (uint32_t c = c0; c < c1; ++c) (*csum)(i, c) = upi[c];
    for (uint32_t c = c0; c < c1; ++c) upi[c] = ui[c] + ai[c] * upi[c];
  }
}

// Downward pass: down_c = a_c (*) (down_p + up_p - a_p (*) up_c). The
// subtraction removes c's own subtree from the parent total directly, so
// transition entries at machine zero are safe.
template <class T>
void pass_down(const RootedTree& tree, const Matrix<T>& a, const Matrix<T>& up,
               Matrix<T>& down, uint32_t c0, uint32_t c1) {
  const uint32_t L = tree.L;
  for (uint32_t c = c0; c < c1; ++c) down(tree.root, c) = T(0);
  for (uint32_t idx = 1; idx < L; ++idx) {
    uint32_t i = tree.order[idx];
    uint32_t p = static_cast<uint32_t>(tree.parent[i]);
    T* di = down.row(i);
    const T* dp = down.row(p);
    const T* upp = up.row(p);
    const T* upi = up.row(i);
    const T* ai = a.row(i);
    const T* ap = a.row(p);
    for (uint32_t c = c0; c < c1; ++c) di[c] = ai[c] * (dp[c] + upp[c] - ap[c] * upi[c]);
  }
}

template <class T>
Matrix<T> full_scan_impl(const RootedTree& tree, const Matrix<T>& a, const Matrix<T>& u,
                         PathConvention convention, Exec exec) {
  check_tree_params(tree, a, u);
  const uint32_t L = tree.L, N = a.cols();
  Matrix<T> up(L, N), down(L, N), h(L, N);
  for_channel_blocks(N, exec, [&](uint32_t c0, uint32_t c1) {
    pass_up<T>(tree, a, u, up, nullptr, c0, c1);
    pass_down<T>(tree, a, up, down, c0, c1);
    if (convention == PathConvention::edge_count) {
      for (uint32_t i = 0; i < L; ++i)
        for (uint32_t c = c0; c < c1; ++c) h(i, c) = up(i, c) + down(i, c);
    } else {
      // interior_only: children contribute without the destination factor
      // and the outside contribution enters through the parent total.
      for (uint32_t i = 0; i < L; ++i) {
        for (uint32_t c = c0; c < c1; ++c) h(i, c) = u(i, c);
        for (uint32_t child : tree.children[i])
          for (uint32_t c = c0; c < c1; ++c) h(i, c) += up(child, c);
        if (tree.parent[i] != RootedTree::kNoParent) {
          uint32_t p = static_cast<uint32_t>(tree.parent[i]);
          for (uint32_t c = c0; c < c1; ++c)
            h(i, c) += up(p, c) + down(p, c) - a(p, c) * up(i, c);
        }
      }
    }
  });
  return h;
}

}  // namespace

void ScanParams::validate() const {
  if (!a.same_shape(u)) throw ContractError("ScanParams a and u shapes differ");
  if (a.rows() < 1 || a.cols() < 1) throw ContractError("ScanParams must be non-empty");
  for (size_t i = 0; i < a.size(); ++i) {
    double x = a.data()[i];
    if (!(x > 0.0 && x < 1.0))
      throw InvalidInputError("transition entries must lie strictly in (0, 1)");
  }
  if (!u.all_finite()) throw InvalidInputError("state injections must be finite");
}

std::vector<double> path_weight(const RootedTree& tree, const Matrixd& a, uint32_t j,
                                uint32_t i, PathConvention convention) {
  if (j >= tree.L || i >= tree.L) throw ContractError("path_weight node index out of range");
  if (a.rows() != tree.L) throw ContractError("path_weight: a rows must equal L");
  const uint32_t N = a.cols();
  std::vector<double> prod(N, 1.0);

  // Collect the path j -> ... -> lca -> ... -> i by climbing both ends.
  std::vector<uint32_t> left, right;
  uint32_t x = j, y = i;
  while (tree.depth[x] > tree.depth[y]) {
    left.push_back(x);
    x = static_cast<uint32_t>(tree.parent[x]);
  }
  while (tree.depth[y] > tree.depth[x]) {
    right.push_back(y);
    y = static_cast<uint32_t>(tree.parent[y]);
  }
  while (x != y) {
    left.push_back(x);
    right.push_back(y);
    x = static_cast<uint32_t>(tree.parent[x]);
    y = static_cast<uint32_t>(tree.parent[y]);
  }
  std::vector<uint32_t> path = left;  // j ... (before lca)
  path.push_back(x);                  // lca
  path.insert(path.end(), right.rbegin(), right.rend());

  size_t first = 1;                  // both conventions exclude the source
  size_t last = path.size();         // edge_count includes the destination
  if (convention == PathConvention::interior_only && path.size() > 1) --last;
  for (size_t t = first; t < last; ++t) {
    const double* row = a.row(path[t]);
    for (uint32_t c = 0; c < N; ++c) prod[c] *= row[c];
  }
  return prod;
}

Matrixd scan_dense_oracle(const RootedTree& tree, const ScanParams& params,
                          PathConvention convention) {
  params.validate();
  check_tree_params(tree, params.a, params.u);
  const uint32_t L = tree.L, N = params.N();

  // Undirected adjacency straight from parent pointers; this walk never
  // touches the two-pass code it is an oracle for.
  std::vector<std::vector<uint32_t>> adj(L);
  for (uint32_t i = 0; i < L; ++i) {
    if (tree.parent[i] == RootedTree::kNoParent) continue;
    uint32_t p = static_cast<uint32_t>(tree.parent[i]);
    adj[i].push_back(p);
    adj[p].push_back(i);
  }
  for (auto& v : adj) std::sort(v.begin(), v.end());

  Matrixd h(L, N, 0.0);
  Matrixd prod(L, N);
  std::vector<uint32_t> queue(L);
  std::vector<char> seen(L);
  for (uint32_t j = 0; j < L; ++j) {
    std::fill(seen.begin(), seen.end(), 0);
    queue[0] = j;
    seen[j] = 1;
    for (uint32_t c = 0; c < N; ++c) prod(j, c) = 1.0;
    size_t head = 0, tail = 1;
    const double* uj = params.u.row(j);
    while (head < tail) {
      uint32_t m = queue[head++];
      const double* pm = prod.row(m);
      for (uint32_t c = 0; c < N; ++c) h(m, c) += pm[c] * uj[c];
      for (uint32_t k : adj[m]) {
        if (seen[k]) continue;
        seen[k] = 1;
        double* pk = prod.row(k);
        if (convention == PathConvention::edge_count) {
          const double* ak = params.a.row(k);
          for (uint32_t c = 0; c < N; ++c) pk[c] = pm[c] * ak[c];
        } else {
          const double* am = params.a.row(m);
          for (uint32_t c = 0; c < N; ++c) pk[c] = (m == j) ? pm[c] : pm[c] * am[c];
        }
        queue[tail++] = k;
      }
    }
  }
  return h;
}

Matrixd scan_rooted(const RootedTree& tree, const ScanParams& params,
                    PathConvention convention, Exec exec) {
  params.validate();
  check_tree_params(tree, params.a, params.u);
  const uint32_t L = tree.L, N = params.N();
  Matrixd up(L, N);
  Matrixd h(L, N);
  for_channel_blocks(N, exec, [&](uint32_t c0, uint32_t c1) {
    pass_up<double>(tree, params.a, params.u, up, nullptr, c0, c1);
    if (convention == PathConvention::edge_count) {
      for (uint32_t i = 0; i < L; ++i)
        for (uint32_t c = c0; c < c1; ++c) h(i, c) = up(i, c);
    } else {
      for (uint32_t i = 0; i < L; ++i) {
        for (uint32_t c = c0; c < c1; ++c) h(i, c) = params.u(i, c);
        for (uint32_t child : tree.children[i])
          for (uint32_t c = c0; c < c1; ++c) h(i, c) += up(child, c);
      }
    }
  });
  return h;
}

Matrixd scan_full(const RootedTree& tree, const ScanParams& params, PathConvention convention,
                  Exec exec) {
  params.validate();
  return full_scan_impl<double>(tree, params.a, params.u, convention, exec);
}

Matrixf scan_full_f32(const RootedTree& tree, const Matrix<float>& a, const Matrix<float>& u,
                      PathConvention convention, Exec exec) {
  return full_scan_impl<float>(tree, a, u, convention, exec);
}

namespace {

struct BackwardScratch {
  Matrixd up, csum, down, gup, gdown;
};

// Shared reverse passes. Seeds in gup/gdown must already contain every
// direct contribution of grad_h to the pass outputs for the convention in
// play.
void reverse_passes(const RootedTree& tree, const ScanParams& params, BackwardScratch& s,
                    GradientBundle& out, bool ran_down, uint32_t c0, uint32_t c1) {
  const uint32_t L = tree.L;
  const Matrixd& a = params.a;

  if (ran_down) {
    // Unwind the downward pass, children before parents.
    for (uint32_t idx = L; idx-- > 1;) {
      uint32_t i = tree.order[idx];
      uint32_t p = static_cast<uint32_t>(tree.parent[i]);
      for (uint32_t c = c0; c < c1; ++c) {
        double g = s.gdown(i, c);
        double term = s.down(p, c) + s.up(p, c) - a(p, c) * s.up(i, c);
        out.d_a(i, c) += g * term;
        double t = g * a(i, c);
        s.gdown(p, c) += t;
        s.gup(p, c) += t;
        out.d_a(p, c) -= t * s.up(i, c);
        s.gup(i, c) -= t * a(p, c);
      }
    }
  }
  // Unwind the upward pass, parents before children.
  for (uint32_t idx = 0; idx < L; ++idx) {
    uint32_t i = tree.order[idx];
    for (uint32_t c = c0; c < c1; ++c) {
      double g = s.gup(i, c);
      out.d_a(i, c) += g * s.csum(i, c);
      out.d_u(i, c) += g;
    }
    for (uint32_t child : tree.children[i]) {
      for (uint32_t c = c0; c < c1; ++c) s.gup(child, c) += s.gup(i, c) * a(i, c);
    }
  }
}

}  // namespace

GradientBundle scan_full_backward(const RootedTree& tree, const ScanParams& params,
                                  const Matrixd& grad_h, PathConvention convention,
                                  Exec exec) {
  params.validate();
  check_tree_params(tree, params.a, params.u);
  if (!grad_h.same_shape(params.a)) throw ContractError("grad_h shape mismatch");
  const uint32_t L = tree.L, N = params.N();

  GradientBundle out{Matrixd(L, N, 0.0), Matrixd(L, N, 0.0)};
  BackwardScratch s{Matrixd(L, N), Matrixd(L, N), Matrixd(L, N), Matrixd(L, N, 0.0),
                    Matrixd(L, N, 0.0)};
  for_channel_blocks(N, exec, [&](uint32_t c0, uint32_t c1) {
    pass_up<double>(tree, params.a, params.u, s.up, &s.csum, c0, c1);
    pass_down<double>(tree, params.a, s.up, s.down, c0, c1);
    if (convention == PathConvention::edge_count) {
      for (uint32_t i = 0; i < L; ++i)
        for (uint32_t c = c0; c < c1; ++c) {
          s.gup(i, c) = grad_h(i, c);
          s.gdown(i, c) = grad_h(i, c);
        }
    } else {
      for (uint32_t i = 0; i < L; ++i) {
        for (uint32_t c = c0; c < c1; ++c) out.d_u(i, c) += grad_h(i, c);
        for (uint32_t child : tree.children[i])
          for (uint32_t c = c0; c < c1; ++c) s.gup(child, c) += grad_h(i, c);
        if (tree.parent[i] != RootedTree::kNoParent) {
          uint32_t p = static_cast<uint32_t>(tree.parent[i]);
          for (uint32_t c = c0; c < c1; ++c) {
            double g = grad_h(i, c);
            s.gup(p, c) += g;
            s.gdown(p, c) += g;
            out.d_a(p, c) -= g * s.up(i, c);
            s.gup(i, c) -= g * params.a(p, c);
          }
        }
      }
    }
    reverse_passes(tree, params, s, out, true, c0, c1);
  });
  return out;
}

GradientBundle scan_rooted_backward(const RootedTree& tree, const ScanParams& params,
                                    const Matrixd& grad_h, PathConvention convention,
                                    Exec exec) {
  params.validate();
  check_tree_params(tree, params.a, params.u);
  if (!grad_h.same_shape(params.a)) throw ContractError("grad_h shape mismatch");
  const uint32_t L = tree.L, N = params.N();

  GradientBundle out{Matrixd(L, N, 0.0), Matrixd(L, N, 0.0)};
  BackwardScratch s{Matrixd(L, N), Matrixd(L, N), Matrixd(L, N, 0.0), Matrixd(L, N, 0.0),
                    Matrixd(L, N, 0.0)};
  for_channel_blocks(N, exec, [&](uint32_t c0, uint32_t c1) {
    pass_up<double>(tree, params.a, params.u, s.up, &s.csum, c0, c1);
    if (convention == PathConvention::edge_count) {
      for (uint32_t i = 0; i < L; ++i)
        for (uint32_t c = c0; c < c1; ++c) s.gup(i, c) = grad_h(i, c);
    } else {
      for (uint32_t i = 0; i < L; ++i) {
        for (uint32_t c = c0; c < c1; ++c) out.d_u(i, c) += grad_h(i, c);
        for (uint32_t child : tree.children[i])
          for (uint32_t c = c0; c < c1; ++c) s.gup(child, c) += grad_h(i, c);
      }
    }
    reverse_passes(tree, params, s, out, false, c0, c1);
  });
  return out;
}

Matrixd sequential_scan_1d(const ScanParams& params) {
  params.validate();
  const uint32_t L = params.L(), N = params.N();
  Matrixd h(L, N);
  for (uint32_t c = 0; c < N; ++c) h(0, c) = params.u(0, c);
  for (uint32_t i = 1; i < L; ++i)
    for (uint32_t c = 0; c < N; ++c) h(i, c) = params.a(i, c) * h(i - 1, c) + params.u(i, c);
  return h;
}

GradientBundle sequential_scan_1d_backward(const ScanParams& params, const Matrixd& grad_h) {
  params.validate();
  if (!grad_h.same_shape(params.a)) throw ContractError("grad_h shape mismatch");
  const uint32_t L = params.L(), N = params.N();
  Matrixd h = sequential_scan_1d(params);
  GradientBundle out{Matrixd(L, N, 0.0), Matrixd(L, N, 0.0)};
  Matrixd gh = grad_h;
  for (uint32_t i = L; i-- > 0;) {
    for (uint32_t c = 0; c < N; ++c) {
      out.d_u(i, c) = gh(i, c);
      if (i > 0) {
        out.d_a(i, c) = gh(i, c) * h(i - 1, c);
        gh(i - 1, c) += gh(i, c) * params.a(i, c);
      }
    }
  }
  return out;
}

}  // namespace ggssm
