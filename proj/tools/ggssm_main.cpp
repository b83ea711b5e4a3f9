// ggssm: command-line entry point exposing every pipeline stage.
//
// Exit codes: 0 success, 1 contract/config/I-O error, 2 invariant or test
// failure.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "ggssm/errors.hpp"
#include "ggssm/graph.hpp"
#include "ggssm/harness.hpp"
#include "ggssm/layer.hpp"
#include "ggssm/mst.hpp"
#include "ggssm/scan.hpp"
#include "ggssm/soft_heap.hpp"
#include "ggssm/tensor_io.hpp"
#include "ggssm/threads.hpp"

namespace {

using namespace ggssm;

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << text;
  if (!os) throw IoError("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

CandidateTopology topology_from_flags(const std::string& kind, uint32_t grid_h, uint32_t grid_w,
                                      uint32_t connectivity, uint32_t k) {
  if (kind == "dense") return CandidateTopology::dense();
  if (kind == "grid") return CandidateTopology::grid(grid_h, grid_w, connectivity);
  if (kind == "knn") return CandidateTopology::knn(k);
  throw ConfigError("unknown topology '" + kind + "' (dense|grid|knn)");
}

SpanningTree run_mst_algorithm(MstAlgorithm algo, std::span<const WeightedEdge> edges,
                               uint32_t L, double soft_epsilon, bool certify) {
  switch (algo) {
    case MstAlgorithm::kruskal:
      return mst_kruskal(edges, L);
    case MstAlgorithm::prim:
      return mst_prim(edges, L);
    case MstAlgorithm::boruvka_soft: {
      BoruvkaSoftOptions opts;
      opts.epsilon = soft_epsilon;
      opts.certify = certify;
      return mst_boruvka_soft(edges, L, opts);
    }
  }
  throw ConfigError("unknown mst algorithm");
}

ScanParams read_scan_params(const std::string& path) {
  TensorMap m = read_tensor_map(path);
  auto ita = m.find("a");
  auto itu = m.find("u");
  if (ita == m.end() || itu == m.end())
    throw IoError("params file must contain tensors 'a' and 'u'");
  ScanParams p{matrix_from_tensor(ita->second), matrix_from_tensor(itu->second)};
  p.validate();
  return p;
}

void write_scan_params(const std::string& path, const ScanParams& p) {
  TensorMap m;
  m["a"] = tensor_from_matrix(p.a);
  m["u"] = tensor_from_matrix(p.u);
  write_tensor_map(path, m);
}

// ---------------------------------------------------------------------------
// selftest: condensed invariant suite, one line per group.

struct SelftestState {
  int failures = 0;

  void group(const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "PASS " : "FAIL ") << name;
    if (!detail.empty()) std::cout << "  (" << detail << ")";
    std::cout << "\n";
    if (!ok) ++failures;
  }
};

bool nearly_equal(double a, double b, double tol) { return std::abs(a - b) <= tol; }

void selftest_graph(SelftestState& st, uint64_t seed) {
  Rng rng(seed);
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 20 && ok; ++trial) {
    uint32_t L = 3 + static_cast<uint32_t>(rng.integer(0, 13));
    uint32_t D = 2 + static_cast<uint32_t>(rng.integer(0, 6));
    FeatureSet f{rng.matrix_normal(L, D)};
    auto pairs = build_candidate_edges(f, CandidateTopology::dense());
    auto edges = weigh_edges(f, pairs);
    for (const auto& e : edges) {
      if (e.w < std::exp(-1.0) - 1e-9 || e.w > std::exp(1.0) + 1e-9) {
        ok = false;
        detail = "weight out of range";
      }
      std::vector<double> a(f.data.row(e.u), f.data.row(e.u) + D);
      std::vector<double> b(f.data.row(e.v), f.data.row(e.v) + D);
      if (cosine_dissimilarity(a, b) != cosine_dissimilarity(b, a)) {
        ok = false;
        detail = "asymmetric";
      }
    }
    // positive rescaling of one row leaves incident weights unchanged
    FeatureSet g = f;
    uint32_t row = static_cast<uint32_t>(rng.integer(0, L - 1));
    double c = rng.uniform(0.5, 3.0);
    for (uint32_t d = 0; d < D; ++d) g.data(row, d) *= c;
    auto edges2 = weigh_edges(g, pairs);
    for (size_t i = 0; i < edges.size(); ++i) {
      if (!nearly_equal(edges[i].w, edges2[i].w, 1e-12)) {
        ok = false;
        detail = "not scale invariant";
      }
    }
  }
  st.group("graph_invariants", ok, detail);
}

void selftest_mst(SelftestState& st, uint64_t seed) {
  Rng rng(seed);
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 60 && ok; ++trial) {
    uint32_t L = 2 + static_cast<uint32_t>(rng.integer(0, 6));
    FeatureSet f{rng.matrix_normal(L, 3)};
    auto edges = weigh_edges(f, build_candidate_edges(f, CandidateTopology::dense()));
    auto oracle = mst_bruteforce(edges, L);
    for (auto algo : {MstAlgorithm::kruskal, MstAlgorithm::prim, MstAlgorithm::boruvka_soft}) {
      auto t = run_mst_algorithm(algo, edges, L, 0.125, false);
      if (t.total_weight != oracle.total_weight || t.edges.size() != L - 1u) {
        ok = false;
        detail = to_string(algo) + " differs from brute force";
      }
    }
  }
  for (int trial = 0; trial < 30 && ok; ++trial) {
    uint32_t L = 8 + static_cast<uint32_t>(rng.integer(0, 56));
    FeatureSet f{rng.matrix_normal(L, 4)};
    auto edges = weigh_edges(f, build_candidate_edges(f, CandidateTopology::dense()));
    auto a = mst_kruskal(edges, L);
    auto b = mst_prim(edges, L);
    auto c = mst_boruvka_soft(edges, L);
    if (a.edges != b.edges || a.edges != c.edges) {
      ok = false;
      detail = "edge sets differ under distinct weights";
    }
  }
  st.group("mst_agreement", ok, detail);
}

void selftest_soft_heap(SelftestState& st, uint64_t seed) {
  Rng rng(seed);
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 100 && ok; ++trial) {
    double eps = trial % 2 ? 0.125 : 0.0625;
    SoftHeap<double, int> heap(eps);
    uint64_t inserted = 0;
    std::multiset<int> alive;
    uint32_t ops = 100 + static_cast<uint32_t>(rng.integer(0, 1900));
    for (uint32_t op = 0; op < ops; ++op) {
      if (heap.empty() || rng.uniform(0, 1) < 0.6) {
        int payload = static_cast<int>(rng.integer(0, 1 << 30));
        heap.insert(rng.normal(), payload);
        alive.insert(payload);
        ++inserted;
      } else {
        auto got = heap.extract_min();
        auto it = alive.find(got.payload);
        if (it == alive.end()) {
          ok = false;
          detail = "payload multiset broken";
          break;
        }
        alive.erase(it);
      }
      if (heap.corrupted_count() > static_cast<uint64_t>(std::ceil(eps * inserted))) {
        ok = false;
        detail = "corruption bound exceeded";
        break;
      }
    }
    while (ok && !heap.empty()) {
      auto got = heap.extract_min();
      auto it = alive.find(got.payload);
      if (it == alive.end()) {
        ok = false;
        detail = "payload multiset broken on drain";
      } else {
        alive.erase(it);
      }
    }
    if (ok && !alive.empty()) {
      ok = false;
      detail = "items lost";
    }
  }
  st.group("soft_heap_bounds", ok, detail);
}

void selftest_scan(SelftestState& st, uint64_t seed) {
  Rng rng(seed);
  bool ok = true;
  std::string detail;
  for (int trial = 0; trial < 30 && ok; ++trial) {
    uint32_t L = 2 + static_cast<uint32_t>(rng.integer(0, 126));
    uint32_t N = 1u << rng.integer(0, 2);
    RootedTree tree =
        root_tree(random_labeled_tree(rng, L), static_cast<uint32_t>(rng.integer(0, L - 1)));
    ScanParams p{Matrixd(L, N), Matrixd(L, N)};
    for (size_t i = 0; i < p.a.size(); ++i) p.a.data()[i] = rng.uniform(0.05, 0.95);
    for (size_t i = 0; i < p.u.size(); ++i) p.u.data()[i] = rng.normal();

    Matrixd dense = scan_dense_oracle(tree, p);
    Matrixd fast = scan_full(tree, p);
    double sup = 0.0, ref = 0.0;
    for (size_t i = 0; i < dense.size(); ++i) {
      sup = std::max(sup, std::abs(dense.data()[i] - fast.data()[i]));
      ref = std::max(ref, std::abs(dense.data()[i]));
    }
    if (sup / (1.0 + ref) > 1e-9) {
      ok = false;
      detail = "dense oracle mismatch";
    }
    // root invariance
    RootedTree other =
        root_tree(SpanningTree{tree.L, [&] {
                                 std::vector<WeightedEdge> es;
                                 for (uint32_t i = 0; i < L; ++i)
                                   if (tree.parent[i] >= 0)
                                     es.push_back({std::min<uint32_t>(i, tree.parent[i]),
                                                   std::max<uint32_t>(i, tree.parent[i]), 1.0});
                                 std::sort(es.begin(), es.end(),
                                           [](auto& a, auto& b) {
                                             return a.u != b.u ? a.u < b.u : a.v < b.v;
                                           });
                                 return es;
                               }(),
                               0.0},
                  static_cast<uint32_t>(rng.integer(0, L - 1)));
    Matrixd fast2 = scan_full(other, p);
    for (size_t i = 0; i < fast.size(); ++i) {
      double rel = std::abs(fast.data()[i] - fast2.data()[i]) /
                   std::max(1.0, std::abs(fast.data()[i]));
      if (rel > 1e-10) {
        ok = false;
        detail = "root dependence";
      }
    }
  }
  // chain reduction
  for (int trial = 0; trial < 20 && ok; ++trial) {
    uint32_t L = 2 + static_cast<uint32_t>(rng.integer(0, 62));
    std::vector<WeightedEdge> es;
    for (uint32_t i = 0; i + 1 < L; ++i) es.push_back({i, i + 1, 1.0});
    RootedTree chain = root_tree(SpanningTree{L, es, static_cast<double>(L - 1)}, L - 1);
    ScanParams p{Matrixd(L, 2), Matrixd(L, 2)};
    for (size_t i = 0; i < p.a.size(); ++i) p.a.data()[i] = rng.uniform(0.05, 0.95);
    for (size_t i = 0; i < p.u.size(); ++i) p.u.data()[i] = rng.normal();
    Matrixd h1 = scan_rooted(chain, p);
    Matrixd h2 = sequential_scan_1d(p);
    for (size_t i = 0; i < h1.size(); ++i)
      if (!nearly_equal(h1.data()[i], h2.data()[i], 1e-12)) {
        ok = false;
        detail = "chain reduction broken";
      }
  }
  st.group("scan_oracles", ok, detail);
}

void selftest_gradients(SelftestState& st, uint64_t seed) {
  auto report = gradcheck_suite(20, seed);
  st.group("gradcheck", report.passed,
           "max rel err " + std::to_string(report.max_rel_error));
}

void selftest_formats(SelftestState& st, uint64_t seed) {
  Rng rng(seed);
  bool ok = true;
  std::string detail;
  std::string dir = "/tmp/ggssm_selftest_" + std::to_string(seed);
  std::filesystem::create_directories(dir);
  {
    Matrixd m = rng.matrix_normal(7, 3);
    write_tensor(dir + "/t.ggt", tensor_from_matrix(m));
    Matrixd back = matrix_from_tensor(read_tensor(dir + "/t.ggt"));
    if (back.storage() != m.storage()) {
      ok = false;
      detail = "tensor round trip";
    }
  }
  {
    LayerWeights w = init_layer_weights(seed, 4, 5);
    save_layer_weights(dir + "/w.ggt", w);
    LayerWeights back = load_layer_weights(dir + "/w.ggt");
    if (back.W_B.storage() != w.W_B.storage() || back.A_log != w.A_log) {
      ok = false;
      detail = "weights round trip";
    }
  }
  {
    Rng r2(seed + 1);
    SpanningTree t = random_labeled_tree(r2, 12);
    for (auto& e : t.edges) e.w = r2.uniform(0.4, 2.7);
    t.total_weight = 0.0;
    for (const auto& e : t.edges) t.total_weight += e.w;
    std::string doc = tree_to_json(t, 3);
    TreeDocument parsed = tree_from_json(doc);
    if (parsed.tree.edges != t.edges || parsed.root != 3 ||
        parsed.tree.total_weight != t.total_weight) {
      ok = false;
      detail = "tree document round trip";
    }
  }
  st.group("formats_round_trip", ok, detail);
}

void selftest_ablate(SelftestState& st, uint64_t seed) {
  AblateOptions opts;
  opts.sizes = {{192, 6}};
  opts.repeats = 3;
  opts.seed = seed;
  bool ok = true;
  std::string detail;
  try {
    auto rep = ablate_mst(opts);
    for (const auto& row : rep.cases.at(0).rows)
      if (!row.bit_identical) ok = false;
  } catch (const Error& e) {
    ok = false;
    detail = e.what();
  }
  st.group("ablate_identity", ok, detail);
}

int run_selftest(uint64_t seed) {
  SelftestState st;
  selftest_graph(st, seed + 1);
  selftest_mst(st, seed + 2);
  selftest_soft_heap(st, seed + 3);
  selftest_scan(st, seed + 4);
  selftest_gradients(st, seed + 5);
  selftest_formats(st, seed + 6);
  selftest_ablate(st, seed + 7);
  int groups = 7;
  std::cout << (groups - st.failures) << "/" << groups << " invariant groups passed\n";
  return st.failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-generating state space models: dissimilarity graphs, MSTs, tree scans"};
  app.require_subcommand(1);

  uint64_t seed = 0;
  int threads = 0;
  app.add_option("--seed", seed, "global random seed")->capture_default_str();
  app.add_option("--threads", threads,
                 "worker thread cap (overrides GGSSM_THREADS; 0 = runtime default)");

  // --- mst ---
  auto* cmd_mst = app.add_subcommand("mst", "build a weighted graph and extract its MST");
  std::string mst_input, mst_out, mst_topology = "dense", mst_algo = "kruskal";
  std::string mst_root_policy = "node_zero";
  uint32_t mst_grid_h = 0, mst_grid_w = 0, mst_conn = 4, mst_k = 0;
  uint32_t mst_dense_cap = kDefaultDenseCap;
  double mst_eps = 0.125;
  bool mst_verify = false;
  cmd_mst->add_option("--input", mst_input, "feature file (GGT1 or headered CSV)")->required();
  cmd_mst->add_option("--topology", mst_topology, "dense|grid|knn")->capture_default_str();
  cmd_mst->add_option("--grid-h", mst_grid_h, "grid rows");
  cmd_mst->add_option("--grid-w", mst_grid_w, "grid cols");
  cmd_mst->add_option("--connectivity", mst_conn, "grid connectivity 4|8");
  cmd_mst->add_option("--k", mst_k, "knn neighbor count");
  cmd_mst->add_option("--dense-cap", mst_dense_cap, "max L for dense topology");
  cmd_mst->add_option("--algo", mst_algo, "kruskal|prim|boruvka_soft")->capture_default_str();
  cmd_mst->add_option("--epsilon", mst_eps, "soft heap corruption parameter");
  cmd_mst->add_flag("--verify", mst_verify, "run the path-max certificate (boruvka_soft)");
  cmd_mst->add_option("--root-policy", mst_root_policy, "node_zero|max_degree");
  cmd_mst->add_option("--out", mst_out, "tree document path")->required();

  // --- scan ---
  auto* cmd_scan = app.add_subcommand("scan", "propagate states along a rooted tree");
  std::string scan_tree, scan_params, scan_out, scan_mode = "full",
              scan_convention = "edge_count";
  bool scan_oracle_check = false;
  cmd_scan->add_option("--tree", scan_tree, "tree document from `mst`")->required();
  cmd_scan->add_option("--params", scan_params, "GGT1 container with tensors 'a' and 'u'")
      ->required();
  cmd_scan->add_option("--mode", scan_mode, "full|rooted")->capture_default_str();
  cmd_scan->add_option("--convention", scan_convention, "edge_count|interior_only")
      ->capture_default_str();
  cmd_scan->add_flag("--oracle-check", scan_oracle_check,
                     "compare against the dense oracle and fail above 1e-9");
  cmd_scan->add_option("--out", scan_out, "hidden state output (GGT1)");

  // --- layer ---
  auto* cmd_layer = app.add_subcommand("layer", "run the full GG-SSM layer");
  std::string layer_input, layer_weights, layer_save_weights, layer_config, layer_out;
  std::string layer_save_params, layer_dump_hidden, layer_save_tree;
  uint32_t layer_n = 8;
  cmd_layer->add_option("--input", layer_input, "feature file")->required();
  cmd_layer->add_option("--weights", layer_weights, "weights container (GGT1)");
  cmd_layer->add_option("--n", layer_n, "state dimension when initializing fresh weights")
      ->capture_default_str();
  cmd_layer->add_option("--save-weights", layer_save_weights, "write the weights in use");
  cmd_layer->add_option("--config", layer_config, "layer config JSON document");
  cmd_layer->add_option("--save-params", layer_save_params,
                        "write discretized scan params (GGT1 container)");
  cmd_layer->add_option("--save-tree", layer_save_tree, "write the rooted MST document");
  cmd_layer->add_option("--dump-hidden", layer_dump_hidden, "write pre-head hidden states");
  cmd_layer->add_option("--out", layer_out, "layer output (GGT1)");

  // --- gradcheck ---
  auto* cmd_grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  uint32_t grad_trials = 100;
  std::string grad_out;
  cmd_grad->add_option("--trials", grad_trials, "number of trials")->capture_default_str();
  cmd_grad->add_option("--out", grad_out, "report path (JSON)");

  // --- bench ---
  auto* cmd_bench = app.add_subcommand("bench", "scaling benchmark for scans and MSTs");
  std::string bench_sizes = "4096,8192,16384,32768,65536,131072", bench_out;
  uint32_t bench_n = 32, bench_dense_max = 1u << 12;
  int bench_repeats = 5;
  bool bench_parallel = false;
  cmd_bench->add_option("--sizes", bench_sizes, "comma-separated ascending L values")
      ->capture_default_str();
  cmd_bench->add_option("--n", bench_n, "state dimension")->capture_default_str();
  cmd_bench->add_option("--repeats", bench_repeats, "timing repeats")->capture_default_str();
  cmd_bench->add_option("--dense-max", bench_dense_max, "largest L for the dense oracle");
  cmd_bench->add_flag("--parallel", bench_parallel, "also time the OpenMP kernels");
  cmd_bench->add_option("--out", bench_out, "report path (JSON)");

  // --- ablate ---
  auto* cmd_ablate = app.add_subcommand("ablate", "MST algorithm ablation");
  std::string ablate_sizes = "512:8,2048:8,10000:10", ablate_out, ablate_table;
  uint32_t ablate_d = 8, ablate_n = 8;
  int ablate_repeats = 5;
  cmd_ablate->add_option("--sizes", ablate_sizes, "comma-separated L:k pairs")
      ->capture_default_str();
  cmd_ablate->add_option("--d", ablate_d, "feature dimension")->capture_default_str();
  cmd_ablate->add_option("--n", ablate_n, "state dimension")->capture_default_str();
  cmd_ablate->add_option("--repeats", ablate_repeats, "timing repeats")->capture_default_str();
  cmd_ablate->add_option("--out", ablate_out, "report path (JSON)");
  cmd_ablate->add_option("--table", ablate_table, "aligned text table path");

  // --- train ---
  auto* cmd_train = app.add_subcommand("train", "toy gradient-descent trainer");
  std::string train_task = "tree_diffusion", train_model = "tree_full", train_out;
  uint32_t train_l = 32, train_d = 8, train_n = 4, train_batch = 1;
  uint64_t train_steps = 500;
  double train_lr = 1e-2;
  bool train_timings = false;
  cmd_train->add_option("--task", train_task, "tree_diffusion|chain_copy")
      ->capture_default_str();
  cmd_train->add_option("--model", train_model, "tree_full|tree_rooted|sequential_1d")
      ->capture_default_str();
  cmd_train->add_option("--l", train_l, "node count")->capture_default_str();
  cmd_train->add_option("--d", train_d, "feature dimension")->capture_default_str();
  cmd_train->add_option("--n", train_n, "state dimension")->capture_default_str();
  cmd_train->add_option("--steps", train_steps, "training steps")->capture_default_str();
  cmd_train->add_option("--lr", train_lr, "learning rate")->capture_default_str();
  cmd_train->add_option("--batch", train_batch, "instances per step")->capture_default_str();
  cmd_train->add_flag("--timings", train_timings, "include wall times in the metrics file");
  cmd_train->add_option("--out", train_out, "metrics path (JSON)");

  // --- selftest ---
  auto* cmd_selftest =
      app.add_subcommand("selftest", "run the condensed invariant suite (exit 2 on failure)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 1;
  }

  try {
    if (const char* env = std::getenv("GGSSM_THREADS"); env && threads == 0)
      threads = std::atoi(env);
    if (threads > 0) threads::set_max_threads(threads);

    if (*cmd_mst) {
      FeatureSet f{read_matrix_auto(mst_input)};
      auto topo = topology_from_flags(mst_topology, mst_grid_h, mst_grid_w, mst_conn, mst_k);
      auto pairs = build_candidate_edges(f, topo, mst_dense_cap);
      auto edges = weigh_edges(f, pairs);
      SpanningTree tree = run_mst_algorithm(mst_algorithm_from_string(mst_algo), edges, f.L(),
                                            mst_eps, mst_verify);
      uint32_t root = 0;
      if (root_policy_from_string(mst_root_policy) == RootPolicy::max_degree) {
        std::vector<uint32_t> deg(f.L(), 0);
        for (const auto& e : tree.edges) {
          ++deg[e.u];
          ++deg[e.v];
        }
        for (uint32_t i = 1; i < f.L(); ++i)
          if (deg[i] > deg[root]) root = i;
      }
      write_text_file(mst_out, tree_to_json(tree, root));
      std::cout << "L=" << tree.L << " edges_in=" << edges.size()
                << " total_weight=" << tree.total_weight << " -> " << mst_out << "\n";
      return 0;
    }

    if (*cmd_scan) {
      TreeDocument doc = tree_from_json(read_text_file(scan_tree));
      RootedTree tree = root_tree(doc.tree, doc.root);
      ScanParams params = read_scan_params(scan_params);
      if (params.L() != tree.L)
        throw ContractError("params rows do not match the tree node count");
      PathConvention conv = path_convention_from_string(scan_convention);
      Matrixd h = scan_mode == "rooted" ? scan_rooted(tree, params, conv)
                  : scan_mode == "full"
                      ? scan_full(tree, params, conv)
                      : throw ConfigError("unknown scan mode '" + scan_mode + "'");
      if (!scan_out.empty()) write_tensor(scan_out, tensor_from_matrix(h));
      if (scan_oracle_check) {
        if (scan_mode != "full")
          throw ConfigError("--oracle-check applies to the full scan mode");
        Matrixd dense = scan_dense_oracle(tree, params, conv);
        double sup = 0.0, ref = 0.0;
        for (size_t i = 0; i < h.size(); ++i) {
          sup = std::max(sup, std::abs(h.data()[i] - dense.data()[i]));
          ref = std::max(ref, std::abs(dense.data()[i]));
        }
        double rel = sup / (1.0 + ref);
        std::cout << "oracle max relative deviation " << rel << "\n";
        if (rel > 1e-9) {
          std::cerr << "oracle check failed (tolerance 1e-9)\n";
          return 2;
        }
      }
      return 0;
    }

    if (*cmd_layer) {
      FeatureSet f{read_matrix_auto(layer_input)};
      LayerConfig cfg;
      if (!layer_config.empty()) cfg = layer_config_from_json(read_text_file(layer_config));
      LayerWeights w = layer_weights.empty()
                           ? init_layer_weights(seed, layer_n, f.d_model())
                           : load_layer_weights(layer_weights);
      if (!layer_save_weights.empty()) save_layer_weights(layer_save_weights, w);
      LayerTrace trace;
      Matrixd y = layer_forward_traced(f, w, cfg, trace);
      if (!layer_out.empty()) write_tensor(layer_out, tensor_from_matrix(y));
      if (!layer_save_params.empty()) write_scan_params(layer_save_params, trace.scan_params);
      if (!layer_dump_hidden.empty())
        write_tensor(layer_dump_hidden, tensor_from_matrix(trace.hidden));
      if (!layer_save_tree.empty()) {
        SpanningTree st;
        st.L = trace.tree.L;
        for (uint32_t i = 0; i < trace.tree.L; ++i)
          if (trace.tree.parent[i] != RootedTree::kNoParent) {
            uint32_t p = static_cast<uint32_t>(trace.tree.parent[i]);
            // weight reconstructed below from the scan input edges
            st.edges.push_back({std::min(i, p), std::max(i, p), 1.0});
          }
        // keep real weights for the document
        auto pairs = build_candidate_edges(f, cfg.topology, cfg.dense_cap);
        auto all = weigh_edges(f, pairs);
        std::map<uint64_t, double> wmap;
        for (const auto& e : all) wmap[static_cast<uint64_t>(e.u) << 32 | e.v] = e.w;
        for (auto& e : st.edges) e.w = wmap.at(static_cast<uint64_t>(e.u) << 32 | e.v);
        std::sort(st.edges.begin(), st.edges.end(),
                  [](auto& a, auto& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
        st.total_weight = 0.0;
        for (const auto& e : st.edges) st.total_weight += e.w;
        write_text_file(layer_save_tree, tree_to_json(st, trace.tree.root));
      }
      std::cout << "layer output " << y.rows() << "x" << y.cols();
      if (!layer_out.empty()) std::cout << " -> " << layer_out;
      std::cout << "\n";
      return 0;
    }

    if (*cmd_grad) {
      auto report = gradcheck_suite(grad_trials, seed);
      if (!grad_out.empty()) write_text_file(grad_out, gradcheck_to_json(report).dump(2) + "\n");
      std::cout << "gradcheck " << (report.passed ? "passed" : "FAILED") << ": max rel error "
                << report.max_rel_error << " over " << report.trials.size() << " trials\n";
      return report.passed ? 0 : 2;
    }

    if (*cmd_bench) {
      std::vector<uint32_t> sizes;
      std::stringstream ss(bench_sizes);
      for (std::string tok; std::getline(ss, tok, ',');)
        sizes.push_back(static_cast<uint32_t>(std::stoul(tok)));
      BenchOptions opts;
      opts.N = bench_n;
      opts.repeats = bench_repeats;
      opts.parallel = bench_parallel;
      opts.dense_max = bench_dense_max;
      opts.seed = seed;
      if (!bench_parallel) threads::set_max_threads(1);  // stable timings by default
      auto report = bench_scaling(sizes, opts);
      if (!bench_out.empty()) write_text_file(bench_out, bench_to_json(report).dump(2) + "\n");
      for (const auto& p : report.points) {
        std::cout << "L=" << p.L << " scan_full=" << p.scan_full_s * 1e3 << "ms";
        if (report.parallel) std::cout << " omp=" << p.scan_full_omp_s * 1e3 << "ms";
        std::cout << " kruskal=" << p.mst_kruskal_s * 1e3
                  << "ms boruvka_soft=" << p.mst_boruvka_soft_s * 1e3 << "ms";
        if (p.dense_oracle_s > 0) std::cout << " dense=" << p.dense_oracle_s * 1e3 << "ms";
        std::cout << "\n";
      }
      std::cout << "scan per-doubling ratios:";
      for (double r : report.scan_ratios) std::cout << " " << r;
      std::cout << "\n";
      return 0;
    }

    if (*cmd_ablate) {
      AblateOptions opts;
      opts.sizes.clear();
      std::stringstream ss(ablate_sizes);
      for (std::string tok; std::getline(ss, tok, ',');) {
        auto pos = tok.find(':');
        if (pos == std::string::npos) throw ConfigError("ablate sizes must be L:k pairs");
        opts.sizes.push_back({static_cast<uint32_t>(std::stoul(tok.substr(0, pos))),
                              static_cast<uint32_t>(std::stoul(tok.substr(pos + 1)))});
      }
      opts.D_model = ablate_d;
      opts.N = ablate_n;
      opts.repeats = ablate_repeats;
      opts.seed = seed;
      auto report = ablate_mst(opts);
      std::string table = ablate_to_table(report);
      std::cout << table;
      if (!ablate_out.empty()) write_text_file(ablate_out, ablate_to_json(report).dump(2) + "\n");
      if (!ablate_table.empty()) write_text_file(ablate_table, table);
      return 0;
    }

    if (*cmd_train) {
      SyntheticTask task = task_kind_from_string(train_task) == TaskKind::tree_diffusion
                               ? gen_tree_task(seed, train_l, train_d, train_n)
                               : gen_chain_task(seed, train_l, train_d, train_n);
      TrainConfig cfg;
      cfg.steps = train_steps;
      cfg.learning_rate = train_lr;
      cfg.batch = train_batch;
      cfg.model = train_model_from_string(train_model);
      cfg.seed = seed;
      Metrics metrics = train_toy(task, cfg);
      if (!train_out.empty())
        write_text_file(train_out, metrics_to_json(metrics, train_timings).dump(2) + "\n");
      std::cout << "loss " << metrics.loss_trace.front() << " -> " << metrics.loss_trace.back()
                << "  val_mse " << metrics.final_val_mse << "\n";
      return 0;
    }

    if (*cmd_selftest) return run_selftest(seed);
  } catch (const InvariantError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const DivergedError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
