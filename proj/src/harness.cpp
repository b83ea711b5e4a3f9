#include "ggssm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <set>

#include "ggssm/errors.hpp"

namespace ggssm {
namespace {

using Clock = std::chrono::steady_clock;

SpanningTree finish_tree_sorted(std::vector<WeightedEdge> edges, uint32_t L) {
  std::sort(edges.begin(), edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  SpanningTree t;
  t.L = L;
  t.edges = std::move(edges);
  for (const auto& e : t.edges) t.total_weight += e.w;
  return t;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

SpanningTree random_labeled_tree(Rng& rng, uint32_t L) {
  std::vector<WeightedEdge> edges;
  if (L == 2) {
    edges.push_back({0, 1, 1.0});
  } else if (L > 2) {
    std::vector<uint32_t> seq(L - 2);
    for (auto& x : seq) x = static_cast<uint32_t>(rng.integer(0, L - 1));
    std::vector<uint32_t> deg(L, 1);
    for (uint32_t x : seq) ++deg[x];
    std::set<uint32_t> leaves;
    for (uint32_t i = 0; i < L; ++i)
      if (deg[i] == 1) leaves.insert(i);
    for (uint32_t x : seq) {
      uint32_t leaf = *leaves.begin();
      leaves.erase(leaves.begin());
      edges.push_back({std::min(leaf, x), std::max(leaf, x), 1.0});
      if (--deg[x] == 1) leaves.insert(x);
    }
    uint32_t u = *leaves.begin();
    uint32_t v = *std::next(leaves.begin());
    edges.push_back({std::min(u, v), std::max(u, v), 1.0});
  }
  return finish_tree_sorted(std::move(edges), L);
}

double time_median_s(const std::function<void()>& fn, int repeats, int warmups) {
  for (int i = 0; i < warmups; ++i) fn();
  std::vector<double> times(repeats);
  for (int i = 0; i < repeats; ++i) {
    auto t0 = Clock::now();
    fn();
    times[i] = std::chrono::duration<double>(Clock::now() - t0).count();
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

// ---------------------------------------------------------------------------
// Toy model

ToyModel init_toy_model(uint64_t seed, uint32_t N, uint32_t D) {
  Rng rng(seed);
  ToyModel m;
  m.P_u = rng.matrix_normal(N, D, 0.5 / std::sqrt(D));
  m.a_logit.resize(N);
  for (auto& x : m.a_logit) x = rng.uniform(-1.0, 1.0);
  m.C_gate.resize(N);
  for (auto& x : m.C_gate) x = rng.uniform(0.5, 1.5);
  m.Q_out = rng.matrix_normal(N, D, 0.5 / std::sqrt(N));
  m.D_skip.resize(D);
  for (auto& x : m.D_skip) x = rng.uniform(-0.3, 0.3);
  return m;
}

std::string to_string(TrainModel m) {
  switch (m) {
    case TrainModel::tree_full: return "tree_full";
    case TrainModel::tree_rooted: return "tree_rooted";
    case TrainModel::sequential_1d: return "sequential_1d";
  }
  return "?";
}

TrainModel train_model_from_string(const std::string& s) {
  if (s == "tree_full" || s == "full") return TrainModel::tree_full;
  if (s == "tree_rooted" || s == "rooted") return TrainModel::tree_rooted;
  if (s == "sequential_1d" || s == "1d") return TrainModel::sequential_1d;
  throw ConfigError("unknown train model '" + s + "'");
}

namespace {

ScanParams toy_scan_params(const ToyModel& m, const Matrixd& inputs) {
  const uint32_t L = inputs.rows(), D = inputs.cols(), N = m.N();
  ScanParams p{Matrixd(L, N), Matrixd(L, N)};
  std::vector<double> a_of_n(N);
  for (uint32_t n = 0; n < N; ++n) a_of_n[n] = sigmoid(m.a_logit[n]);
  for (uint32_t i = 0; i < L; ++i) {
    const double* xi = inputs.row(i);
    for (uint32_t n = 0; n < N; ++n) {
      double u = 0.0;
      const double* pn = m.P_u.row(n);
      for (uint32_t d = 0; d < D; ++d) u += pn[d] * xi[d];
      p.a(i, n) = a_of_n[n];
      p.u(i, n) = u;
    }
  }
  return p;
}

Matrixd toy_head(const ToyModel& m, const Matrixd& h, const Matrixd& inputs,
                 double norm_epsilon) {
  const uint32_t L = inputs.rows(), D = inputs.cols(), N = m.N();
  Matrixd y(L, D);
  for (uint32_t i = 0; i < L; ++i) {
    auto r = rms_normalize(std::span(h.row(i), N), norm_epsilon);
    const double* xi = inputs.row(i);
    double* yi = y.row(i);
    for (uint32_t d = 0; d < D; ++d) yi[d] = m.D_skip[d] * xi[d];
    for (uint32_t n = 0; n < N; ++n) {
      double g = m.C_gate[n] * r[n];
      const double* qn = m.Q_out.row(n);
      for (uint32_t d = 0; d < D; ++d) yi[d] += g * qn[d];
    }
  }
  return y;
}

Matrixd toy_hidden(const ToyModel& m, const RootedTree* tree, const Matrixd& inputs,
                   TrainModel kind) {
  ScanParams p = toy_scan_params(m, inputs);
  switch (kind) {
    case TrainModel::tree_full:
      require(tree != nullptr, "toy_forward: tree required for tree_full");
      return scan_full(*tree, p);
    case TrainModel::tree_rooted:
      require(tree != nullptr, "toy_forward: tree required for tree_rooted");
      return scan_rooted(*tree, p);
    case TrainModel::sequential_1d:
      return sequential_scan_1d(p);
  }
  throw ContractError("unknown train model");
}

double mse_of(const Matrixd& y, const Matrixd& t) {
  double s = 0.0;
  for (size_t i = 0; i < y.size(); ++i) {
    double d = y.data()[i] - t.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(y.size());
}

}  // namespace

ToyForwardResult toy_forward(const ToyModel& m, const RootedTree* tree, const Matrixd& inputs,
                             const Matrixd& targets, TrainModel kind, double norm_epsilon) {
  ToyForwardResult out;
  out.h = toy_hidden(m, tree, inputs, kind);
  out.y = toy_head(m, out.h, inputs, norm_epsilon);
  out.mse = mse_of(out.y, targets);
  return out;
}

ToyGradients toy_backward(const ToyModel& m, const RootedTree* tree, const Matrixd& inputs,
                          const Matrixd& targets, TrainModel kind, double norm_epsilon) {
  const uint32_t L = inputs.rows(), D = inputs.cols(), N = m.N();
  ScanParams p = toy_scan_params(m, inputs);
  Matrixd h = toy_hidden(m, tree, inputs, kind);
  Matrixd y = toy_head(m, h, inputs, norm_epsilon);

  ToyGradients g;
  g.d_P_u = Matrixd(N, D, 0.0);
  g.d_a_logit.assign(N, 0.0);
  g.d_C_gate.assign(N, 0.0);
  g.d_Q_out = Matrixd(N, D, 0.0);
  g.d_D_skip.assign(D, 0.0);

  const double scale = 2.0 / static_cast<double>(y.size());
  Matrixd dh(L, N, 0.0);
  std::vector<double> dy(D), dgate(N), r(N);
  for (uint32_t i = 0; i < L; ++i) {
    const double* xi = inputs.row(i);
    const double* hi = h.row(i);
    for (uint32_t d = 0; d < D; ++d) {
      dy[d] = scale * (y(i, d) - targets(i, d));
      g.d_D_skip[d] += dy[d] * xi[d];
    }
    double ms = 0.0;
    for (uint32_t n = 0; n < N; ++n) ms += hi[n] * hi[n];
    ms /= N;
    double inv = 1.0 / std::sqrt(ms + norm_epsilon);
    for (uint32_t n = 0; n < N; ++n) r[n] = hi[n] * inv;

    for (uint32_t n = 0; n < N; ++n) {
      const double* qn = m.Q_out.row(n);
      double* dqn = g.d_Q_out.row(n);
      double acc = 0.0;
      for (uint32_t d = 0; d < D; ++d) {
        acc += qn[d] * dy[d];
        dqn[d] += m.C_gate[n] * r[n] * dy[d];
      }
      dgate[n] = acc;
      g.d_C_gate[n] += r[n] * acc;
    }
    // rms backward: dh = inv*dr - h * <dr, h> * inv^3 / N
    double dot = 0.0;
    for (uint32_t n = 0; n < N; ++n) dot += m.C_gate[n] * dgate[n] * hi[n];
    double k = dot * inv * inv * inv / N;
    for (uint32_t n = 0; n < N; ++n) dh(i, n) = inv * m.C_gate[n] * dgate[n] - hi[n] * k;
  }

  GradientBundle scan_grads;
  switch (kind) {
    case TrainModel::tree_full:
      scan_grads = scan_full_backward(*tree, p, dh);
      break;
    case TrainModel::tree_rooted:
      scan_grads = scan_rooted_backward(*tree, p, dh);
      break;
    case TrainModel::sequential_1d:
      scan_grads = sequential_scan_1d_backward(p, dh);
      break;
  }
  for (uint32_t n = 0; n < N; ++n) {
    double a = sigmoid(m.a_logit[n]);
    double da_dlogit = a * (1.0 - a);
    double acc = 0.0;
    for (uint32_t i = 0; i < L; ++i) acc += scan_grads.d_a(i, n);
    g.d_a_logit[n] = acc * da_dlogit;
  }
  for (uint32_t n = 0; n < N; ++n) {
    double* pn = g.d_P_u.row(n);
    for (uint32_t i = 0; i < L; ++i) {
      const double* xi = inputs.row(i);
      double du = scan_grads.d_u(i, n);
      for (uint32_t d = 0; d < D; ++d) pn[d] += du * xi[d];
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Synthetic tasks

std::string to_string(TaskKind k) {
  return k == TaskKind::tree_diffusion ? "tree_diffusion" : "chain_copy";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "tree_diffusion") return TaskKind::tree_diffusion;
  if (s == "chain_copy") return TaskKind::chain_copy;
  throw ConfigError("unknown task kind '" + s + "'");
}

namespace {

// Features correlated along the hidden tree, so an MST over them tends to
// recover that tree.
Matrixd diffuse_along_tree(Rng& rng, const RootedTree& rt, uint32_t D, double rho = 0.9) {
  const uint32_t L = rt.L;
  Matrixd x(L, D);
  double mix = std::sqrt(1.0 - rho * rho);
  for (uint32_t d = 0; d < D; ++d) x(rt.root, d) = rng.normal();
  for (uint32_t idx = 1; idx < L; ++idx) {
    uint32_t i = rt.order[idx];
    uint32_t pnode = static_cast<uint32_t>(rt.parent[i]);
    for (uint32_t d = 0; d < D; ++d) x(i, d) = rho * x(pnode, d) + mix * rng.normal();
  }
  return x;
}

Matrixd teacher_forward_dense(const SyntheticTask& task, const Matrixd& inputs) {
  RootedTree rt = root_tree(task.teacher_tree, 0);
  ScanParams p = toy_scan_params(task.teacher, inputs);
  Matrixd h = scan_dense_oracle(rt, p);
  return toy_head(task.teacher, h, inputs, 1e-6);
}

}  // namespace

Matrixd teacher_targets_dense(const SyntheticTask& task, const Matrixd& inputs) {
  require(task.kind == TaskKind::tree_diffusion, "teacher targets exist for tree_diffusion");
  return teacher_forward_dense(task, inputs);
}

SyntheticTask gen_tree_task(uint64_t seed, uint32_t L, uint32_t D_model, uint32_t N) {
  require(L >= 1 && D_model >= 1 && N >= 1, "task sizes must be >= 1");
  SyntheticTask task;
  task.seed = seed;
  task.L = L;
  task.D_model = D_model;
  task.N = N;
  task.kind = TaskKind::tree_diffusion;

  Rng rng(seed);
  task.teacher_tree = random_labeled_tree(rng, L);
  task.teacher = init_toy_model(rng.integer(0, ~0ull), N, D_model);

  RootedTree rt = root_tree(task.teacher_tree, 0);
  task.inputs = diffuse_along_tree(rng, rt, D_model);
  task.val_inputs = diffuse_along_tree(rng, rt, D_model);
  task.targets = teacher_forward_dense(task, task.inputs);
  task.val_targets = teacher_forward_dense(task, task.val_inputs);
  return task;
}

SyntheticTask gen_chain_task(uint64_t seed, uint32_t L, uint32_t D_model, uint32_t N) {
  require(L >= 1 && D_model >= 1 && N >= 1, "task sizes must be >= 1");
  SyntheticTask task;
  task.seed = seed;
  task.L = L;
  task.D_model = D_model;
  task.N = N;
  task.kind = TaskKind::chain_copy;
  Rng rng(seed);
  auto lagged = [&](const Matrixd& in) {
    Matrixd t(L, D_model, 0.0);
    for (uint32_t i = 1; i < L; ++i)
      for (uint32_t d = 0; d < D_model; ++d) t(i, d) = in(i - 1, d);
    return t;
  };
  task.inputs = rng.matrix_normal(L, D_model);
  task.targets = lagged(task.inputs);
  task.val_inputs = rng.matrix_normal(L, D_model);
  task.val_targets = lagged(task.val_inputs);
  return task;
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be finite and non-negative");
  if (batch < 1) throw ConfigError("batch must be >= 1");
}

namespace {

struct TrainInstance {
  Matrixd inputs, targets;
  RootedTree tree;  // student MST over the instance inputs
  bool has_tree = false;
};

RootedTree student_tree(const Matrixd& inputs) {
  FeatureSet f{inputs};
  auto pairs = build_candidate_edges(f, CandidateTopology::dense());
  auto edges = weigh_edges(f, pairs);
  return root_tree(mst_kruskal(edges, f.L()), 0);
}

TrainInstance make_instance(const SyntheticTask& task, uint32_t index, bool needs_tree) {
  TrainInstance inst;
  if (index == 0) {
    inst.inputs = task.inputs;
    inst.targets = task.targets;
  } else if (task.kind == TaskKind::tree_diffusion) {
    Rng rng(task.seed * 0x9E3779B97F4A7C15ull + 7919ull * index);
    RootedTree rt = root_tree(task.teacher_tree, 0);
    inst.inputs = diffuse_along_tree(rng, rt, task.D_model);
    inst.targets = teacher_forward_dense(task, inst.inputs);
  } else {
    Rng rng(task.seed * 0x9E3779B97F4A7C15ull + 7919ull * index);
    inst.inputs = rng.matrix_normal(task.L, task.D_model);
    inst.targets = Matrixd(task.L, task.D_model, 0.0);
    for (uint32_t i = 1; i < task.L; ++i)
      for (uint32_t d = 0; d < task.D_model; ++d) inst.targets(i, d) = inst.inputs(i - 1, d);
  }
  if (needs_tree && task.L > 1) {
    inst.tree = student_tree(inst.inputs);
    inst.has_tree = true;
  } else if (needs_tree) {
    SpanningTree single;
    single.L = 1;
    inst.tree = root_tree(single, 0);
    inst.has_tree = true;
  }
  return inst;
}

void axpy(std::vector<double>& x, const std::vector<double>& g, double c) {
  for (size_t i = 0; i < x.size(); ++i) x[i] += c * g[i];
}
void axpy(Matrixd& x, const Matrixd& g, double c) {
  for (size_t i = 0; i < x.size(); ++i) x.data()[i] += c * g.data()[i];
}

}  // namespace

Metrics train_toy(const SyntheticTask& task, const TrainConfig& cfg) {
  cfg.validate();
  bool needs_tree = cfg.model != TrainModel::sequential_1d;
  std::vector<TrainInstance> instances;
  instances.reserve(cfg.batch);
  for (uint32_t b = 0; b < cfg.batch; ++b) instances.push_back(make_instance(task, b, needs_tree));

  ToyModel model = init_toy_model(cfg.seed, task.N, task.D_model);
  Metrics metrics;
  metrics.loss_trace.reserve(cfg.steps);

  auto t0 = Clock::now();
  for (uint64_t step = 0; step < cfg.steps; ++step) {
    double loss = 0.0;
    ToyGradients acc;
    acc.d_P_u = Matrixd(task.N, task.D_model, 0.0);
    acc.d_a_logit.assign(task.N, 0.0);
    acc.d_C_gate.assign(task.N, 0.0);
    acc.d_Q_out = Matrixd(task.N, task.D_model, 0.0);
    acc.d_D_skip.assign(task.D_model, 0.0);
    for (const auto& inst : instances) {
      const RootedTree* tree = inst.has_tree ? &inst.tree : nullptr;
      loss += toy_forward(model, tree, inst.inputs, inst.targets, cfg.model).mse;
      ToyGradients g = toy_backward(model, tree, inst.inputs, inst.targets, cfg.model);
      axpy(acc.d_P_u, g.d_P_u, 1.0);
      axpy(acc.d_a_logit, g.d_a_logit, 1.0);
      axpy(acc.d_C_gate, g.d_C_gate, 1.0);
      axpy(acc.d_Q_out, g.d_Q_out, 1.0);
      axpy(acc.d_D_skip, g.d_D_skip, 1.0);
    }
    loss /= cfg.batch;
    if (!std::isfinite(loss) || loss > 1e6)
      throw DivergedError(step, "loss " + std::to_string(loss));
    metrics.loss_trace.push_back(loss);

    double lr = -cfg.learning_rate / cfg.batch;
    axpy(model.P_u, acc.d_P_u, lr);
    axpy(model.a_logit, acc.d_a_logit, lr);
    axpy(model.C_gate, acc.d_C_gate, lr);
    axpy(model.Q_out, acc.d_Q_out, lr);
    axpy(model.D_skip, acc.d_D_skip, lr);
  }
  metrics.wall_per_step_s =
      std::chrono::duration<double>(Clock::now() - t0).count() / cfg.steps;

  double train_mse = 0.0;
  for (const auto& inst : instances) {
    const RootedTree* tree = inst.has_tree ? &inst.tree : nullptr;
    train_mse += toy_forward(model, tree, inst.inputs, inst.targets, cfg.model).mse;
  }
  metrics.final_train_mse = train_mse / cfg.batch;

  RootedTree val_tree;
  const RootedTree* vt = nullptr;
  if (needs_tree) {
    val_tree = task.L > 1 ? student_tree(task.val_inputs) : [] {
      SpanningTree single;
      single.L = 1;
      return root_tree(single, 0);
    }();
    vt = &val_tree;
  }
  metrics.final_val_mse =
      toy_forward(model, vt, task.val_inputs, task.val_targets, cfg.model).mse;
  return metrics;
}

nlohmann::json metrics_to_json(const Metrics& m, bool include_timings) {
  nlohmann::json j{{"schema_version", 1},
                   {"loss_trace", m.loss_trace},
                   {"final_train_mse", m.final_train_mse},
                   {"final_val_mse", m.final_val_mse}};
  if (include_timings) j["wall_per_step_s"] = m.wall_per_step_s;
  return j;
}

// ---------------------------------------------------------------------------
// Gradient checking

namespace {

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

RootedTree random_test_tree(Rng& rng, uint32_t L, int shape) {
  std::vector<WeightedEdge> edges;
  if (shape == 0) {  // chain
    for (uint32_t i = 0; i + 1 < L; ++i) edges.push_back({i, i + 1, 1.0});
  } else if (shape == 1) {  // star
    for (uint32_t i = 1; i < L; ++i) edges.push_back({0, i, 1.0});
  } else {
    return root_tree(random_labeled_tree(rng, L), static_cast<uint32_t>(rng.integer(0, L - 1)));
  }
  SpanningTree t = finish_tree_sorted(std::move(edges), L);
  return root_tree(t, static_cast<uint32_t>(rng.integer(0, L - 1)));
}

ScanParams random_scan_params(Rng& rng, uint32_t L, uint32_t N) {
  ScanParams p{Matrixd(L, N), Matrixd(L, N)};
  for (size_t i = 0; i < p.a.size(); ++i) p.a.data()[i] = rng.uniform(0.05, 0.95);
  for (size_t i = 0; i < p.u.size(); ++i) p.u.data()[i] = rng.normal();
  return p;
}

// Central finite differences of loss = sum(grad_h (*) scan(params)) with
// respect to every a and u entry.
double scan_gradcheck(const RootedTree& tree, const ScanParams& params, const Matrixd& grad_h,
                      TrainModel kind, double step) {
  auto loss_of = [&](const ScanParams& p) {
    Matrixd h = kind == TrainModel::tree_full
                    ? scan_full(tree, p)
                    : (kind == TrainModel::tree_rooted ? scan_rooted(tree, p)
                                                       : sequential_scan_1d(p));
    double s = 0.0;
    for (size_t i = 0; i < h.size(); ++i) s += grad_h.data()[i] * h.data()[i];
    return s;
  };
  GradientBundle analytic;
  switch (kind) {
    case TrainModel::tree_full:
      analytic = scan_full_backward(tree, params, grad_h);
      break;
    case TrainModel::tree_rooted:
      analytic = scan_rooted_backward(tree, params, grad_h);
      break;
    case TrainModel::sequential_1d:
      analytic = sequential_scan_1d_backward(params, grad_h);
      break;
  }
  double max_err = 0.0;
  ScanParams probe = params;
  for (int which = 0; which < 2; ++which) {
    Matrixd& target = which == 0 ? probe.a : probe.u;
    const Matrixd& grad = which == 0 ? analytic.d_a : analytic.d_u;
    for (size_t i = 0; i < target.size(); ++i) {
      double keep = target.data()[i];
      target.data()[i] = keep + step;
      double up = loss_of(probe);
      target.data()[i] = keep - step;
      double dn = loss_of(probe);
      target.data()[i] = keep;
      max_err = std::max(max_err, rel_error(grad.data()[i], (up - dn) / (2.0 * step)));
    }
  }
  return max_err;
}

// Finite differences across every toy-model parameter.
double toy_gradcheck(Rng& rng, double step) {
  const uint32_t L = 6 + static_cast<uint32_t>(rng.integer(0, 6));
  const uint32_t D = 3, N = 2;
  RootedTree tree = random_test_tree(rng, L, 2);
  Matrixd inputs = rng.matrix_normal(L, D);
  Matrixd targets = rng.matrix_normal(L, D);
  ToyModel model = init_toy_model(rng.integer(0, ~0ull), N, D);

  ToyGradients g = toy_backward(model, &tree, inputs, targets, TrainModel::tree_full);
  auto loss_of = [&](const ToyModel& m) {
    return toy_forward(m, &tree, inputs, targets, TrainModel::tree_full).mse;
  };
  double max_err = 0.0;
  auto probe_vec = [&](std::vector<double> ToyModel::* field,
                       const std::vector<double>& grad) {
    ToyModel m = model;
    for (size_t i = 0; i < (m.*field).size(); ++i) {
      double keep = (m.*field)[i];
      (m.*field)[i] = keep + step;
      double up = loss_of(m);
      (m.*field)[i] = keep - step;
      double dn = loss_of(m);
      (m.*field)[i] = keep;
      max_err = std::max(max_err, rel_error(grad[i], (up - dn) / (2.0 * step)));
    }
  };
  auto probe_mat = [&](Matrixd ToyModel::* field, const Matrixd& grad) {
    ToyModel m = model;
    for (size_t i = 0; i < (m.*field).size(); ++i) {
      double keep = (m.*field).data()[i];
      (m.*field).data()[i] = keep + step;
      double up = loss_of(m);
      (m.*field).data()[i] = keep - step;
      double dn = loss_of(m);
      (m.*field).data()[i] = keep;
      max_err = std::max(max_err, rel_error(grad.data()[i], (up - dn) / (2.0 * step)));
    }
  };
  probe_mat(&ToyModel::P_u, g.d_P_u);
  probe_vec(&ToyModel::a_logit, g.d_a_logit);
  probe_vec(&ToyModel::C_gate, g.d_C_gate);
  probe_mat(&ToyModel::Q_out, g.d_Q_out);
  probe_vec(&ToyModel::D_skip, g.d_D_skip);
  return max_err;
}

}  // namespace

GradcheckReport gradcheck_suite(uint32_t trials, uint64_t seed) {
  require(trials >= 1, "gradcheck_suite needs trials >= 1");
  const double step = 1e-5;
  GradcheckReport report;
  report.tolerance = 1e-6;
  Rng rng(seed);
  for (uint32_t t = 0; t < trials; ++t) {
    GradcheckTrial trial;
    if (t % 5 == 4) {
      trial.description = "toy_head";
      trial.max_rel_error = toy_gradcheck(rng, step);
    } else {
      int shape = t % 3;
      TrainModel kind = t % 4 == 3 ? TrainModel::tree_rooted
                                   : (t % 7 == 6 ? TrainModel::sequential_1d
                                                 : TrainModel::tree_full);
      uint32_t L = 2 + static_cast<uint32_t>(rng.integer(0, 30));
      uint32_t N = 1u << rng.integer(0, 2);
      RootedTree tree = random_test_tree(rng, L, shape);
      ScanParams params = random_scan_params(rng, L, N);
      Matrixd grad_h = rng.matrix_normal(L, N);
      trial.description = std::string(shape == 0 ? "chain" : shape == 1 ? "star" : "random") +
                          "/" + to_string(kind) + "/L=" + std::to_string(L) +
                          "/N=" + std::to_string(N);
      trial.max_rel_error = scan_gradcheck(tree, params, grad_h, kind, step);
    }
    report.max_rel_error = std::max(report.max_rel_error, trial.max_rel_error);
    report.trials.push_back(std::move(trial));
  }
  report.passed = report.max_rel_error < report.tolerance;
  return report;
}

nlohmann::json gradcheck_to_json(const GradcheckReport& r) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : r.trials)
    trials.push_back({{"case", t.description}, {"max_rel_error", t.max_rel_error}});
  return {{"schema_version", 1},
          {"trials", trials},
          {"max_rel_error", r.max_rel_error},
          {"tolerance", r.tolerance},
          {"passed", r.passed}};
}

// ---------------------------------------------------------------------------
// Scaling benchmark

namespace {

// Connected random graph with ~2L distinct-weight edges; decoupled from the
// feature pipeline so MST timing isolates the algorithms.
std::vector<WeightedEdge> random_sparse_graph(Rng& rng, uint32_t L) {
  SpanningTree base = random_labeled_tree(rng, L);
  std::vector<WeightedEdge> edges = base.edges;
  std::set<uint64_t> used;
  for (const auto& e : edges) used.insert(static_cast<uint64_t>(e.u) << 32 | e.v);
  uint32_t extra = L;
  while (extra > 0) {
    uint32_t u = static_cast<uint32_t>(rng.integer(0, L - 1));
    uint32_t v = static_cast<uint32_t>(rng.integer(0, L - 1));
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    uint64_t key = static_cast<uint64_t>(u) << 32 | v;
    if (used.count(key)) continue;
    used.insert(key);
    edges.push_back({u, v, 0.0});
    --extra;
  }
  for (auto& e : edges) e.w = rng.uniform(std::exp(-1.0), std::exp(1.0));
  return edges;
}

}  // namespace

BenchReport bench_scaling(const std::vector<uint32_t>& sizes, const BenchOptions& opts) {
  require(!sizes.empty(), "bench_scaling needs at least one size");
  for (size_t i = 1; i < sizes.size(); ++i)
    require(sizes[i] > sizes[i - 1], "bench_scaling sizes must ascend");

  BenchReport report;
  report.N = opts.N;
  report.parallel = opts.parallel;
  Rng rng(opts.seed);
  for (uint32_t L : sizes) {
    BenchPoint pt;
    pt.L = L;
    RootedTree tree = root_tree(random_labeled_tree(rng, L), 0);
    ScanParams params = random_scan_params(rng, L, opts.N);

    pt.scan_full_s = time_median_s(
        [&] { scan_full(tree, params, PathConvention::edge_count, Exec::serial); },
        opts.repeats);
    if (opts.parallel) {
      pt.scan_full_omp_s = time_median_s(
          [&] { scan_full(tree, params, PathConvention::edge_count, Exec::omp); },
          opts.repeats);
    }

    auto graph = random_sparse_graph(rng, L);
    pt.mst_kruskal_s = time_median_s([&] { mst_kruskal(graph, L); }, opts.repeats);
    pt.mst_boruvka_soft_s = time_median_s([&] { mst_boruvka_soft(graph, L); }, opts.repeats);

    if (L <= opts.dense_max) {
      pt.dense_oracle_s = time_median_s([&] { scan_dense_oracle(tree, params); },
                                        std::min(opts.repeats, 3), 1);
    }
    report.points.push_back(pt);
  }
  for (size_t i = 1; i < report.points.size(); ++i) {
    const auto& a = report.points[i - 1];
    const auto& b = report.points[i];
    if (b.L == 2 * a.L) {
      report.scan_ratios.push_back(b.scan_full_s / a.scan_full_s);
      if (a.dense_oracle_s > 0.0 && b.dense_oracle_s > 0.0)
        report.oracle_ratios.push_back(b.dense_oracle_s / a.dense_oracle_s);
    }
  }
  return report;
}

nlohmann::json bench_to_json(const BenchReport& r) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : r.points) {
    nlohmann::json jp{{"L", p.L},
                      {"scan_full_s", p.scan_full_s},
                      {"mst_kruskal_s", p.mst_kruskal_s},
                      {"mst_boruvka_soft_s", p.mst_boruvka_soft_s}};
    if (r.parallel) jp["scan_full_omp_s"] = p.scan_full_omp_s;
    if (p.dense_oracle_s > 0.0) jp["dense_oracle_s"] = p.dense_oracle_s;
    points.push_back(jp);
  }
  return {{"schema_version", 1},
          {"N", r.N},
          {"parallel", r.parallel},
          {"points", points},
          {"scan_per_doubling_ratios", r.scan_ratios},
          {"oracle_per_doubling_ratios", r.oracle_ratios}};
}

// ---------------------------------------------------------------------------
// MST ablation

AblateReport ablate_mst(const AblateOptions& opts) {
  AblateReport report;
  for (size_t ci = 0; ci < opts.sizes.size(); ++ci) {
    auto [L, k] = opts.sizes[ci];
    Rng rng(opts.seed + 1000 * ci);
    FeatureSet features{rng.matrix_normal(L, opts.D_model)};
    LayerWeights weights = init_layer_weights(opts.seed + 77 + ci, opts.N, opts.D_model);

    LayerConfig cfg;
    cfg.topology = CandidateTopology::knn(k);
    cfg.scan_mode = ScanMode::full;

    // Shared candidate graph for distinctness checking and MST timing.
    auto pairs = build_candidate_edges(features, cfg.topology);
    auto edges = weigh_edges(features, pairs);
    {
      std::vector<double> ws(edges.size());
      for (size_t i = 0; i < edges.size(); ++i) ws[i] = edges[i].w;
      std::sort(ws.begin(), ws.end());
      if (std::adjacent_find(ws.begin(), ws.end()) != ws.end())
        throw InvariantError("ablate_mst drew duplicate edge weights; change the seed");
    }

    AblateCase acase;
    acase.L = L;
    acase.edge_count = edges.size();

    const MstAlgorithm algos[] = {MstAlgorithm::kruskal, MstAlgorithm::prim,
                                  MstAlgorithm::boruvka_soft};
    Matrixd reference;
    double kruskal_time = 0.0;
    for (MstAlgorithm algo : algos) {
      cfg.mst_algorithm = algo;
      Matrixd y = layer_forward(features, weights, cfg);

      AblateRow row;
      row.algorithm = to_string(algo);
      switch (algo) {
        case MstAlgorithm::kruskal:
          row.mst_time_s = time_median_s([&] { mst_kruskal(edges, L); }, opts.repeats);
          break;
        case MstAlgorithm::prim:
          row.mst_time_s = time_median_s([&] { mst_prim(edges, L); }, opts.repeats);
          break;
        case MstAlgorithm::boruvka_soft:
          row.mst_time_s = time_median_s([&] { mst_boruvka_soft(edges, L); }, opts.repeats);
          break;
      }
      if (algo == MstAlgorithm::kruskal) {
        reference = y;
        kruskal_time = row.mst_time_s;
        row.output_max_abs_diff = 0.0;
        row.bit_identical = true;
      } else {
        double max_diff = 0.0;
        for (size_t i = 0; i < y.size(); ++i)
          max_diff = std::max(max_diff, std::abs(y.data()[i] - reference.data()[i]));
        row.output_max_abs_diff = max_diff;
        row.bit_identical =
            std::memcmp(y.data(), reference.data(), y.size() * sizeof(double)) == 0;
        if (!row.bit_identical)
          throw InvariantError("ablate_mst: " + row.algorithm +
                               " output differs from kruskal under distinct weights (L=" +
                               std::to_string(L) + ")");
      }
      row.relative_time = row.mst_time_s / kruskal_time;
      acase.rows.push_back(std::move(row));
    }
    report.cases.push_back(std::move(acase));
  }
  return report;
}

nlohmann::json ablate_to_json(const AblateReport& r) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : r.cases) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : c.rows) {
      rows.push_back({{"algorithm", row.algorithm},
                      {"output_max_abs_diff", row.output_max_abs_diff},
                      {"bit_identical", row.bit_identical},
                      {"mst_time_s", row.mst_time_s},
                      {"relative_time", row.relative_time}});
    }
    cases.push_back({{"L", c.L}, {"edges", c.edge_count}, {"rows", rows}});
  }
  return {{"schema_version", 1}, {"cases", cases}};
}

std::string ablate_to_table(const AblateReport& r) {
  char buf[160];
  std::string out;
  for (const auto& c : r.cases) {
    std::snprintf(buf, sizeof buf, "L=%u  E=%zu\n", c.L, c.edge_count);
    out += buf;
    std::snprintf(buf, sizeof buf, "  %-14s %-18s %-10s\n", "algorithm", "max|dy| vs kruskal",
                  "rel. time");
    out += buf;
    for (const auto& row : c.rows) {
      std::snprintf(buf, sizeof buf, "  %-14s %-18.3g %.2fx\n", row.algorithm.c_str(),
                    row.output_max_abs_diff, row.relative_time);
      out += buf;
    }
  }
  return out;
}

}  // namespace ggssm
