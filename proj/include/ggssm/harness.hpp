#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ggssm/layer.hpp"
#include "ggssm/scan.hpp"

namespace ggssm {

// Uniform random labeled tree on L nodes decoded from a random sequence
// (Pruefer bijection); edge weights fixed at 1.
SpanningTree random_labeled_tree(Rng& rng, uint32_t L);

// Median wall time of fn over `repeats` runs after `warmups` warm-up runs,
// monotonic clock.
double time_median_s(const std::function<void()>& fn, int repeats = 5, int warmups = 2);

// ---------------------------------------------------------------------------
// Toy model: a reduced GG-SSM layer whose gradients are derived by hand and
// exercised end to end by the trainer and the gradcheck suite.
//   u_i = P_u x_i,  a_{i,n} = sigmoid(a_logit_n)
//   h   = chosen scan
//   y_i = sum_n C_n * rmsnorm(h_i)_n * Q_out[n,:] + D_skip (*) x_i
struct ToyModel {
  Matrixd P_u;                  // N x D
  std::vector<double> a_logit;  // N
  std::vector<double> C_gate;   // N
  Matrixd Q_out;                // N x D
  std::vector<double> D_skip;   // D

  uint32_t N() const { return P_u.rows(); }
  uint32_t D() const { return P_u.cols(); }
  size_t parameter_count() const {
    return P_u.size() + a_logit.size() + C_gate.size() + Q_out.size() + D_skip.size();
  }
};

ToyModel init_toy_model(uint64_t seed, uint32_t N, uint32_t D);

enum class TrainModel { tree_full, tree_rooted, sequential_1d };
std::string to_string(TrainModel m);
TrainModel train_model_from_string(const std::string& s);

struct ToyForwardResult {
  Matrixd y;
  Matrixd h;
  double mse = 0.0;
};

// tree may be null for sequential_1d.
ToyForwardResult toy_forward(const ToyModel& m, const RootedTree* tree, const Matrixd& inputs,
                             const Matrixd& targets, TrainModel kind,
                             double norm_epsilon = 1e-6);

struct ToyGradients {
  Matrixd d_P_u;
  std::vector<double> d_a_logit;
  std::vector<double> d_C_gate;
  Matrixd d_Q_out;
  std::vector<double> d_D_skip;
};

// Analytic gradients of the mean-squared error; scan gradients flow through
// scan_full_backward / scan_rooted_backward / the 1-D backward.
ToyGradients toy_backward(const ToyModel& m, const RootedTree* tree, const Matrixd& inputs,
                          const Matrixd& targets, TrainModel kind, double norm_epsilon = 1e-6);

// ---------------------------------------------------------------------------
// Synthetic tasks
enum class TaskKind { tree_diffusion, chain_copy };
std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

struct SyntheticTask {
  uint64_t seed = 0;
  uint32_t L = 0, D_model = 0, N = 0;
  TaskKind kind = TaskKind::tree_diffusion;
  Matrixd inputs, targets;          // train instance
  Matrixd val_inputs, val_targets;  // held-out instance from the same teacher
  // Hidden teacher for tree_diffusion, revealable to evaluators.
  SpanningTree teacher_tree;
  ToyModel teacher;
};

// tree_diffusion: features are diffused along a hidden random tree and the
// targets come from a dense-oracle scan of hidden teacher parameters on
// that tree, so a model that recovers the tree can fit the task while a
// fixed 1-D scan in general cannot.
SyntheticTask gen_tree_task(uint64_t seed, uint32_t L, uint32_t D_model, uint32_t N);
SyntheticTask gen_chain_task(uint64_t seed, uint32_t L, uint32_t D_model, uint32_t N);

// Recomputes tree_diffusion targets from the revealed teacher using the
// dense oracle; test hook for the task generator.
Matrixd teacher_targets_dense(const SyntheticTask& task, const Matrixd& inputs);

struct TrainConfig {
  uint64_t steps = 500;
  double learning_rate = 1e-2;
  uint32_t batch = 1;
  TrainModel model = TrainModel::tree_full;
  uint64_t seed = 0;

  void validate() const;
};

struct Metrics {
  std::vector<double> loss_trace;
  double final_train_mse = 0.0;
  double final_val_mse = 0.0;
  double wall_per_step_s = 0.0;
};

// Plain gradient descent with the hand-derived gradients above. Throws
// DivergedError when the loss leaves the finite regime or exceeds 1e6.
Metrics train_toy(const SyntheticTask& task, const TrainConfig& cfg);

nlohmann::json metrics_to_json(const Metrics& m, bool include_timings = false);

// ---------------------------------------------------------------------------
// Gradient checking
struct GradcheckTrial {
  std::string description;
  double max_rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckTrial> trials;
  double max_rel_error = 0.0;
  double tolerance = 1e-6;
  bool passed = false;
};

// Compares scan_full_backward (plus rooted/sequential variants and the toy
// head) against central finite differences with step 1e-5.
GradcheckReport gradcheck_suite(uint32_t trials, uint64_t seed);

nlohmann::json gradcheck_to_json(const GradcheckReport& r);

// ---------------------------------------------------------------------------
// Scaling benchmark
struct BenchPoint {
  uint32_t L = 0;
  double scan_full_s = 0.0;
  double scan_full_omp_s = 0.0;  // only when parallel requested
  double mst_kruskal_s = 0.0;
  double mst_boruvka_soft_s = 0.0;
  double dense_oracle_s = 0.0;  // only at or below dense_max
};

struct BenchReport {
  std::vector<BenchPoint> points;
  std::vector<double> scan_ratios;    // consecutive per-doubling ratios
  std::vector<double> oracle_ratios;  // over the dense range
  uint32_t N = 0;
  bool parallel = false;
};

struct BenchOptions {
  uint32_t N = 32;
  int repeats = 5;
  bool parallel = false;        // also time the OpenMP kernels
  uint32_t dense_max = 1u << 12;
  uint64_t seed = 0;
};

// Sizes must be ascending. Per-doubling growth ratios are reported for
// consecutive size pairs that differ by exactly 2x.
BenchReport bench_scaling(const std::vector<uint32_t>& sizes, const BenchOptions& opts);

nlohmann::json bench_to_json(const BenchReport& r);

// ---------------------------------------------------------------------------
// MST ablation
struct AblateRow {
  std::string algorithm;
  double output_max_abs_diff = 0.0;  // vs kruskal, exact zero expected
  bool bit_identical = false;
  double mst_time_s = 0.0;
  double relative_time = 0.0;  // kruskal = 1.00
};

struct AblateCase {
  uint32_t L = 0;
  size_t edge_count = 0;
  std::vector<AblateRow> rows;
};

struct AblateReport {
  std::vector<AblateCase> cases;
};

struct AblateOptions {
  // Each entry is (L, knn k); knn keeps the candidate graph near-linear so
  // large L stays benchable.
  std::vector<std::pair<uint32_t, uint32_t>> sizes = {{512, 8}, {2048, 8}, {10000, 10}};
  uint32_t D_model = 8;
  uint32_t N = 8;
  int repeats = 5;
  uint64_t seed = 0;
};

// Runs the layer with each MST algorithm on identical distinct-weight
// inputs; outputs must be bit-identical (throws InvariantError otherwise)
// and per-algorithm MST wall times are reported relative to Kruskal.
AblateReport ablate_mst(const AblateOptions& opts);

nlohmann::json ablate_to_json(const AblateReport& r);
std::string ablate_to_table(const AblateReport& r);

}  // namespace ggssm
