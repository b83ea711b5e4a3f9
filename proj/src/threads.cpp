#include "ggssm/threads.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ggssm::threads {

#ifdef _OPENMP
namespace {
int default_threads = omp_get_max_threads();
}

void set_max_threads(int n) { omp_set_num_threads(n > 0 ? n : default_threads); }
int max_threads() { return omp_get_max_threads(); }
#else
void set_max_threads(int) {}
int max_threads() { return 1; }
#endif

}  // namespace ggssm::threads
