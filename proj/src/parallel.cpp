#include "gsanim/parallel.hpp"

#include <omp.h>

namespace gsanim {

void set_thread_count(int threads) {
  omp_set_num_threads(threads < 1 ? omp_get_num_procs() : threads);
}

int thread_count() {
  return omp_get_max_threads();
}

} // namespace gsanim
