#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ggssm/graph.hpp"
#include "ggssm/mst.hpp"
#include "ggssm/scan.hpp"

namespace ggssm {

enum class MstAlgorithm { kruskal, prim, boruvka_soft };
enum class ScanMode { rooted, full };
enum class RootPolicy { node_zero, max_degree };

std::string to_string(MstAlgorithm a);
std::string to_string(ScanMode m);
std::string to_string(RootPolicy p);
std::string to_string(PathConvention c);
MstAlgorithm mst_algorithm_from_string(const std::string& s);
ScanMode scan_mode_from_string(const std::string& s);
RootPolicy root_policy_from_string(const std::string& s);
PathConvention path_convention_from_string(const std::string& s);

// Learned parameters of one GG-SSM layer. Input-dependent (selective)
// delta/B/C projections, shared A_log transitions, an input mix for the
// state injection, and the output head.
struct LayerWeights {
  std::vector<double> A_log;    // N
  std::vector<double> W_delta;  // D
  Matrixd W_B;                  // N x D
  Matrixd W_C;                  // N x D
  double bias_delta = 0.0;
  std::vector<double> W_x;      // D, channel mix feeding the injection
  std::vector<double> D_skip;   // D
  Matrixd out_proj;             // N x D

  uint32_t N() const { return static_cast<uint32_t>(A_log.size()); }
  uint32_t D() const { return static_cast<uint32_t>(W_delta.size()); }
  void validate() const;
};

LayerWeights init_layer_weights(uint64_t seed, uint32_t N, uint32_t D);
void save_layer_weights(const std::string& path, const LayerWeights& w);
LayerWeights load_layer_weights(const std::string& path);

struct LayerConfig {
  CandidateTopology topology;
  MstAlgorithm mst_algorithm = MstAlgorithm::kruskal;
  ScanMode scan_mode = ScanMode::full;
  PathConvention path_convention = PathConvention::edge_count;
  double norm_epsilon = 1e-6;
  RootPolicy root_policy = RootPolicy::node_zero;
  double soft_epsilon = 0.125;
  uint32_t dense_cap = kDefaultDenseCap;

  void validate() const;
};

std::string layer_config_to_json(const LayerConfig& cfg);
LayerConfig layer_config_from_json(const std::string& text);

struct SelectiveParams {
  std::vector<double> delta;  // L, strictly positive after softplus + clamp
  Matrixd B_in;               // L x N
  Matrixd C_out;              // L x N
};

// delta_i = clamp(softplus(<W_delta, x_i> + bias_delta));
// B_in_i = W_B x_i;  C_out_i = W_C x_i.
SelectiveParams compute_selective_params(const FeatureSet& x, const LayerWeights& w);

// Zero-order hold for the transitions, Euler step for the injection:
//   a_{i,n} = exp(-delta_i * softplus(A_log_n))
//   u_{i,n} = delta_i * B_in_{i,n} * <W_x, x_i>
ScanParams discretize(const std::vector<double>& A_log, const std::vector<double>& delta,
                      const Matrixd& B_in, const FeatureSet& x,
                      const std::vector<double>& W_x);

// h / sqrt(mean(h^2) + epsilon)
std::vector<double> rms_normalize(std::span<const double> h, double epsilon);

// delta is clamped here after softplus, keeping a away from exactly 0/1.
inline constexpr double kDeltaMin = 1e-4;
inline constexpr double kDeltaMax = 10.0;

double softplus(double x);

struct LayerStageTimes {
  double build_edges_s = 0.0;
  double weigh_edges_s = 0.0;
  double mst_s = 0.0;
  double root_s = 0.0;
  double params_s = 0.0;
  double scan_s = 0.0;
  double head_s = 0.0;
};

struct LayerTrace {
  RootedTree tree;
  ScanParams scan_params;
  Matrixd hidden;  // L x N, pre-normalization
  LayerStageTimes times;
};

// Full pipeline: candidate edges -> weights -> MST -> rooted tree ->
// selective params -> discretize -> scan -> per-node head
//   y_i = out_proj(C_out_i (*) rms_normalize(h_i)) + D_skip (*) x_i
Matrixd layer_forward(const FeatureSet& x, const LayerWeights& w, const LayerConfig& cfg,
                      Exec exec = Exec::omp);
Matrixd layer_forward_traced(const FeatureSet& x, const LayerWeights& w,
                             const LayerConfig& cfg, LayerTrace& trace,
                             Exec exec = Exec::omp);

}  // namespace ggssm
