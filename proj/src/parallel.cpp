#include "eigenfolio/parallel.hpp"

#include <omp.h>

namespace eigenfolio {

namespace {
int default_threads() {
  static const int n = omp_get_max_threads();
  return n;
}
}  // namespace

void set_thread_count(int threads) {
  const int fallback = default_threads();
  omp_set_num_threads(threads > 0 ? threads : fallback);
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace eigenfolio
