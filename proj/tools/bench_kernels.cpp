// Compares the serial reference kernels against their OpenMP variants and
// the MST algorithms on identical inputs. Serial and parallel scans must
// agree bit-for-bit (per-channel arithmetic order is thread-independent);
// this binary checks that while reporting the timing ratios.

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "ggssm/graph.hpp"
#include "ggssm/harness.hpp"
#include "ggssm/mst.hpp"
#include "ggssm/scan.hpp"
#include "ggssm/threads.hpp"

using namespace ggssm;

int main(int argc, char** argv) {
  uint32_t L = 65536, N = 32;
  int repeats = 5;
  for (int i = 1; i + 1 < argc; i += 2) {
    std::string flag = argv[i];
    if (flag == "--l") L = static_cast<uint32_t>(std::stoul(argv[i + 1]));
    else if (flag == "--n") N = static_cast<uint32_t>(std::stoul(argv[i + 1]));
    else if (flag == "--repeats") repeats = std::stoi(argv[i + 1]);
    else {
      std::fprintf(stderr, "usage: bench_kernels [--l L] [--n N] [--repeats R]\n");
      return 1;
    }
  }

  Rng rng(1);
  RootedTree tree = root_tree(random_labeled_tree(rng, L), 0);
  ScanParams params{Matrixd(L, N), Matrixd(L, N)};
  for (size_t i = 0; i < params.a.size(); ++i) params.a.data()[i] = rng.uniform(0.05, 0.95);
  for (size_t i = 0; i < params.u.size(); ++i) params.u.data()[i] = rng.normal();

  std::printf("L=%u N=%u threads=%d repeats=%d\n", L, N, threads::max_threads(), repeats);

  Matrixd h_serial, h_omp;
  double t_serial = time_median_s(
      [&] { h_serial = scan_full(tree, params, PathConvention::edge_count, Exec::serial); },
      repeats);
  double t_omp = time_median_s(
      [&] { h_omp = scan_full(tree, params, PathConvention::edge_count, Exec::omp); }, repeats);
  bool identical =
      std::memcmp(h_serial.data(), h_omp.data(), h_serial.size() * sizeof(double)) == 0;
  std::printf("scan_full        serial %8.3fms   omp %8.3fms   speedup %.2fx   bit-identical %s\n",
              t_serial * 1e3, t_omp * 1e3, t_serial / t_omp, identical ? "yes" : "NO");
  if (!identical) return 2;

  FeatureSet f{rng.matrix_normal(std::min(L, 4096u), 16)};
  auto pairs = build_candidate_edges(f, CandidateTopology::dense());
  std::vector<WeightedEdge> e_serial, e_omp;
  double tw_serial =
      time_median_s([&] { e_serial = weigh_edges(f, pairs, Exec::serial); }, repeats);
  double tw_omp = time_median_s([&] { e_omp = weigh_edges(f, pairs, Exec::omp); }, repeats);
  bool w_identical = e_serial.size() == e_omp.size() &&
                     std::memcmp(e_serial.data(), e_omp.data(),
                                 e_serial.size() * sizeof(WeightedEdge)) == 0;
  std::printf("weigh_edges      serial %8.3fms   omp %8.3fms   speedup %.2fx   bit-identical %s\n",
              tw_serial * 1e3, tw_omp * 1e3, tw_serial / tw_omp, w_identical ? "yes" : "NO");
  if (!w_identical) return 2;

  auto graph = [&] {
    Rng r2(7);
    SpanningTree base = random_labeled_tree(r2, L);
    std::vector<WeightedEdge> es = base.edges;
    for (uint32_t i = 0; i < L; ++i) {
      uint32_t u = static_cast<uint32_t>(r2.integer(0, L - 1));
      uint32_t v = static_cast<uint32_t>(r2.integer(0, L - 1));
      if (u == v) continue;
      es.push_back({std::min(u, v), std::max(u, v), 0.0});
    }
    std::sort(es.begin(), es.end(),
              [](auto& a, auto& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
    es.erase(std::unique(es.begin(), es.end(),
                         [](auto& a, auto& b) { return a.u == b.u && a.v == b.v; }),
             es.end());
    for (auto& e : es) e.w = r2.uniform(0.37, 2.71);
    return es;
  }();
  double t_kruskal = time_median_s([&] { mst_kruskal(graph, L); }, repeats);
  double t_soft = time_median_s([&] { mst_boruvka_soft(graph, L); }, repeats);
  std::printf("mst (E=%zu)   kruskal %8.3fms   boruvka_soft %8.3fms   ratio %.2fx\n",
              graph.size(), t_kruskal * 1e3, t_soft * 1e3, t_soft / t_kruskal);
  return 0;
}
