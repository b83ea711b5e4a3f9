#pragma once

#include <cstdint>

namespace ggssm {

// Execution policy for the data-parallel kernels. Serial variants are the
// reference implementations and stay available for testing and benchmarking;
// results are bit-identical across policies because per-channel arithmetic
// order does not depend on the thread count.
enum class Exec { serial, omp };

namespace threads {

// Caps the OpenMP worker count for subsequent kernels. 0 restores the
// runtime default.
void set_max_threads(int n);
int max_threads();

}  // namespace threads
}  // namespace ggssm
