#include "ggssm/layer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ggssm/errors.hpp"
#include "ggssm/tensor_io.hpp"

namespace ggssm {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<double> vec_from_tensor(const Tensor& t, const std::string& name) {
  if (t.dims.size() != 1) throw IoError("weights tensor '" + name + "' must have rank 1");
  return t.values;
}

Tensor tensor_from_vec(const std::vector<double>& v) {
  Tensor t;
  t.dims = {static_cast<uint32_t>(v.size())};
  t.values = v;
  return t;
}

}  // namespace

std::string to_string(MstAlgorithm a) {
  switch (a) {
    case MstAlgorithm::kruskal: return "kruskal";
    case MstAlgorithm::prim: return "prim";
    case MstAlgorithm::boruvka_soft: return "boruvka_soft";
  }
  return "?";
}
std::string to_string(ScanMode m) { return m == ScanMode::rooted ? "rooted" : "full"; }
std::string to_string(RootPolicy p) {
  return p == RootPolicy::node_zero ? "node_zero" : "max_degree";
}
std::string to_string(PathConvention c) {
  return c == PathConvention::edge_count ? "edge_count" : "interior_only";
}

MstAlgorithm mst_algorithm_from_string(const std::string& s) {
  if (s == "kruskal") return MstAlgorithm::kruskal;
  if (s == "prim") return MstAlgorithm::prim;
  if (s == "boruvka_soft") return MstAlgorithm::boruvka_soft;
  throw ConfigError("unknown mst_algorithm '" + s + "'");
}
ScanMode scan_mode_from_string(const std::string& s) {
  if (s == "rooted") return ScanMode::rooted;
  if (s == "full") return ScanMode::full;
  throw ConfigError("unknown scan_mode '" + s + "'");
}
RootPolicy root_policy_from_string(const std::string& s) {
  if (s == "node_zero") return RootPolicy::node_zero;
  if (s == "max_degree") return RootPolicy::max_degree;
  throw ConfigError("unknown root_policy '" + s + "'");
}
PathConvention path_convention_from_string(const std::string& s) {
  if (s == "edge_count") return PathConvention::edge_count;
  if (s == "interior_only") return PathConvention::interior_only;
  throw ConfigError("unknown path_convention '" + s + "'");
}

void LayerWeights::validate() const {
  const uint32_t n = N(), d = D();
  if (n < 1 || d < 1) throw ContractError("LayerWeights needs N >= 1 and D >= 1");
  auto check = [](bool ok, const char* what) {
    if (!ok) throw ContractError(std::string("LayerWeights shape mismatch: ") + what);
  };
  check(W_B.rows() == n && W_B.cols() == d, "W_B");
  check(W_C.rows() == n && W_C.cols() == d, "W_C");
  check(out_proj.rows() == n && out_proj.cols() == d, "out_proj");
  check(W_x.size() == d, "W_x");
  check(D_skip.size() == d, "D_skip");
  auto finite = [](const auto& v) {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  if (!finite(A_log) || !finite(W_delta) || !finite(W_x) || !finite(D_skip) ||
      !std::isfinite(bias_delta) || !W_B.all_finite() || !W_C.all_finite() ||
      !out_proj.all_finite())
    throw InvalidInputError("LayerWeights contain non-finite entries");
}

LayerWeights init_layer_weights(uint64_t seed, uint32_t N, uint32_t D) {
  Rng rng(seed);
  LayerWeights w;
  w.A_log.resize(N);
  for (auto& x : w.A_log) x = rng.uniform(-1.0, 1.0);
  w.W_delta.resize(D);
  for (auto& x : w.W_delta) x = rng.normal(0.0, 1.0 / std::sqrt(D));
  w.W_B = rng.matrix_normal(N, D, 1.0 / std::sqrt(D));
  w.W_C = rng.matrix_normal(N, D, 1.0 / std::sqrt(D));
  w.bias_delta = rng.uniform(-0.5, 0.5);
  w.W_x.resize(D);
  for (auto& x : w.W_x) x = rng.normal(0.0, 1.0 / std::sqrt(D));
  w.D_skip.resize(D);
  for (auto& x : w.D_skip) x = rng.uniform(0.5, 1.5);
  w.out_proj = rng.matrix_normal(N, D, 1.0 / std::sqrt(N));
  return w;
}

void save_layer_weights(const std::string& path, const LayerWeights& w) {
  w.validate();
  TensorMap m;
  m["A_log"] = tensor_from_vec(w.A_log);
  m["W_delta"] = tensor_from_vec(w.W_delta);
  m["W_B"] = tensor_from_matrix(w.W_B);
  m["W_C"] = tensor_from_matrix(w.W_C);
  m["bias_delta"] = tensor_from_vec({w.bias_delta});
  m["W_x"] = tensor_from_vec(w.W_x);
  m["D_skip"] = tensor_from_vec(w.D_skip);
  m["out_proj"] = tensor_from_matrix(w.out_proj);
  write_tensor_map(path, m);
}

LayerWeights load_layer_weights(const std::string& path) {
  TensorMap m = read_tensor_map(path);
  auto need = [&](const char* name) -> const Tensor& {
    auto it = m.find(name);
    if (it == m.end()) throw IoError(std::string("weights file misses tensor '") + name + "'");
    return it->second;
  };
  LayerWeights w;
  w.A_log = vec_from_tensor(need("A_log"), "A_log");
  w.W_delta = vec_from_tensor(need("W_delta"), "W_delta");
  w.W_B = matrix_from_tensor(need("W_B"));
  w.W_C = matrix_from_tensor(need("W_C"));
  auto bias = vec_from_tensor(need("bias_delta"), "bias_delta");
  if (bias.size() != 1) throw IoError("bias_delta must hold one value");
  w.bias_delta = bias[0];
  w.W_x = vec_from_tensor(need("W_x"), "W_x");
  w.D_skip = vec_from_tensor(need("D_skip"), "D_skip");
  w.out_proj = matrix_from_tensor(need("out_proj"));
  w.validate();
  return w;
}

void LayerConfig::validate() const {
  if (!(norm_epsilon > 0.0)) throw ConfigError("norm_epsilon must be positive");
  if (!(soft_epsilon > 0.0 && soft_epsilon <= 0.25))
    throw ConfigError("soft_epsilon must lie in (0, 1/4]");
}

std::string layer_config_to_json(const LayerConfig& cfg) {
  nlohmann::json topo;
  switch (cfg.topology.kind) {
    case CandidateTopology::Kind::dense:
      topo = {{"kind", "dense"}};
      break;
    case CandidateTopology::Kind::grid:
      topo = {{"kind", "grid"},
              {"h", cfg.topology.grid_h},
              {"w", cfg.topology.grid_w},
              {"connectivity", cfg.topology.connectivity}};
      break;
    case CandidateTopology::Kind::knn:
      topo = {{"kind", "knn"}, {"k", cfg.topology.k}};
      break;
  }
  nlohmann::json j{{"schema_version", 1},
                   {"topology", topo},
                   {"mst_algorithm", to_string(cfg.mst_algorithm)},
                   {"scan_mode", to_string(cfg.scan_mode)},
                   {"path_convention", to_string(cfg.path_convention)},
                   {"norm_epsilon", cfg.norm_epsilon},
                   {"root_policy", to_string(cfg.root_policy)},
                   {"soft_epsilon", cfg.soft_epsilon},
                   {"dense_cap", cfg.dense_cap}};
  return j.dump(2) + "\n";
}

LayerConfig layer_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("layer config is not valid JSON: ") + e.what());
  }
  LayerConfig cfg;
  try {
    const auto& topo = j.at("topology");
    std::string kind = topo.at("kind").get<std::string>();
    if (kind == "dense") {
      cfg.topology = CandidateTopology::dense();
    } else if (kind == "grid") {
      cfg.topology = CandidateTopology::grid(topo.at("h").get<uint32_t>(),
                                             topo.at("w").get<uint32_t>(),
                                             topo.value("connectivity", 4u));
    } else if (kind == "knn") {
      cfg.topology = CandidateTopology::knn(topo.at("k").get<uint32_t>());
    } else {
      throw ConfigError("unknown topology kind '" + kind + "'");
    }
    cfg.mst_algorithm = mst_algorithm_from_string(j.at("mst_algorithm").get<std::string>());
    cfg.scan_mode = scan_mode_from_string(j.at("scan_mode").get<std::string>());
    cfg.path_convention =
        path_convention_from_string(j.value("path_convention", std::string("edge_count")));
    cfg.norm_epsilon = j.value("norm_epsilon", 1e-6);
    cfg.root_policy = root_policy_from_string(j.value("root_policy", std::string("node_zero")));
    cfg.soft_epsilon = j.value("soft_epsilon", 0.125);
    cfg.dense_cap = j.value("dense_cap", kDefaultDenseCap);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed layer config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

SelectiveParams compute_selective_params(const FeatureSet& x, const LayerWeights& w) {
  x.validate();
  w.validate();
  if (x.d_model() != w.D())
    throw ContractError("feature dimension " + std::to_string(x.d_model()) +
                        " does not match weights D=" + std::to_string(w.D()));
  const uint32_t L = x.L(), N = w.N(), D = w.D();
  SelectiveParams out;
  out.delta.resize(L);
  out.B_in = Matrixd(L, N);
  out.C_out = Matrixd(L, N);
  for (uint32_t i = 0; i < L; ++i) {
    const double* xi = x.data.row(i);
    double acc = w.bias_delta;
    for (uint32_t d = 0; d < D; ++d) acc += w.W_delta[d] * xi[d];
    out.delta[i] = std::clamp(softplus(acc), kDeltaMin, kDeltaMax);
    for (uint32_t n = 0; n < N; ++n) {
      double b = 0.0, c = 0.0;
      const double* wb = w.W_B.row(n);
      const double* wc = w.W_C.row(n);
      for (uint32_t d = 0; d < D; ++d) {
        b += wb[d] * xi[d];
        c += wc[d] * xi[d];
      }
      out.B_in(i, n) = b;
      out.C_out(i, n) = c;
    }
  }
  return out;
}

ScanParams discretize(const std::vector<double>& A_log, const std::vector<double>& delta,
                      const Matrixd& B_in, const FeatureSet& x,
                      const std::vector<double>& W_x) {
  const uint32_t L = B_in.rows(), N = B_in.cols();
  if (delta.size() != L || x.L() != L || W_x.size() != x.d_model() || A_log.size() != N)
    throw ContractError("discretize: inconsistent shapes");
  for (double d : delta)
    if (!(d > 0.0)) throw ContractError("discretize: delta must be strictly positive");
  ScanParams p{Matrixd(L, N), Matrixd(L, N)};
  std::vector<double> rate(N);
  for (uint32_t n = 0; n < N; ++n) rate[n] = softplus(A_log[n]);
  for (uint32_t i = 0; i < L; ++i) {
    const double* xi = x.data.row(i);
    double s = 0.0;
    for (uint32_t d = 0; d < x.d_model(); ++d) s += W_x[d] * xi[d];
    for (uint32_t n = 0; n < N; ++n) {
      p.a(i, n) = std::exp(-delta[i] * rate[n]);
      p.u(i, n) = delta[i] * B_in(i, n) * s;
    }
  }
  p.validate();
  return p;
}

std::vector<double> rms_normalize(std::span<const double> h, double epsilon) {
  if (!(epsilon > 0.0)) throw ContractError("rms_normalize: epsilon must be positive");
  double ms = 0.0;
  for (double x : h) ms += x * x;
  ms /= static_cast<double>(h.size());
  double inv = 1.0 / std::sqrt(ms + epsilon);
  std::vector<double> out(h.size());
  for (size_t i = 0; i < h.size(); ++i) out[i] = h[i] * inv;
  return out;
}

namespace {

uint32_t pick_root(const SpanningTree& tree, RootPolicy policy) {
  if (policy == RootPolicy::node_zero || tree.L == 1) return 0;
  std::vector<uint32_t> deg(tree.L, 0);
  for (const auto& e : tree.edges) {
    ++deg[e.u];
    ++deg[e.v];
  }
  uint32_t best = 0;
  for (uint32_t i = 1; i < tree.L; ++i)
    if (deg[i] > deg[best]) best = i;
  return best;
}

}  // namespace

Matrixd layer_forward(const FeatureSet& x, const LayerWeights& w, const LayerConfig& cfg,
                      Exec exec) {
  LayerTrace trace;
  return layer_forward_traced(x, w, cfg, trace, exec);
}

Matrixd layer_forward_traced(const FeatureSet& x, const LayerWeights& w,
                             const LayerConfig& cfg, LayerTrace& trace, Exec exec) {
  cfg.validate();
  x.validate();
  w.validate();
  const uint32_t L = x.L(), N = w.N(), D = w.D();

  auto t0 = Clock::now();
  SpanningTree tree;
  if (L == 1) {
    tree.L = 1;  // single node, no edges to build
  } else {
    auto pairs = build_candidate_edges(x, cfg.topology, cfg.dense_cap);
    trace.times.build_edges_s = seconds_since(t0);

    t0 = Clock::now();
    auto edges = weigh_edges(x, pairs, exec);
    trace.times.weigh_edges_s = seconds_since(t0);

    t0 = Clock::now();
    switch (cfg.mst_algorithm) {
      case MstAlgorithm::kruskal:
        tree = mst_kruskal(edges, L);
        break;
      case MstAlgorithm::prim:
        tree = mst_prim(edges, L);
        break;
      case MstAlgorithm::boruvka_soft:
        tree = mst_boruvka_soft(edges, L, cfg.soft_epsilon);
        break;
    }
    trace.times.mst_s = seconds_since(t0);
  }

  t0 = Clock::now();
  trace.tree = root_tree(tree, pick_root(tree, cfg.root_policy));
  trace.times.root_s = seconds_since(t0);

  t0 = Clock::now();
  SelectiveParams sel = compute_selective_params(x, w);
  trace.scan_params = discretize(w.A_log, sel.delta, sel.B_in, x, w.W_x);
  trace.times.params_s = seconds_since(t0);

  t0 = Clock::now();
  trace.hidden = cfg.scan_mode == ScanMode::full
                     ? scan_full(trace.tree, trace.scan_params, cfg.path_convention, exec)
                     : scan_rooted(trace.tree, trace.scan_params, cfg.path_convention, exec);
  trace.times.scan_s = seconds_since(t0);

  t0 = Clock::now();
  Matrixd y(L, D);
  std::vector<double> gated(N);
  for (uint32_t i = 0; i < L; ++i) {
    auto normed = rms_normalize(std::span(trace.hidden.row(i), N), cfg.norm_epsilon);
    for (uint32_t n = 0; n < N; ++n) gated[n] = sel.C_out(i, n) * normed[n];
    const double* xi = x.data.row(i);
    double* yi = y.row(i);
    for (uint32_t d = 0; d < D; ++d) yi[d] = w.D_skip[d] * xi[d];
    for (uint32_t n = 0; n < N; ++n) {
      const double* wo = w.out_proj.row(n);
      for (uint32_t d = 0; d < D; ++d) yi[d] += gated[n] * wo[d];
    }
  }
  trace.times.head_s = seconds_since(t0);
  return y;
}

}  // namespace ggssm
