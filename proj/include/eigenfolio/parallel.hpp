#pragma once

#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>

namespace eigenfolio {

/// Caps the OpenMP team size for subsequent kernels; 0 restores the default.
void set_thread_count(int threads);
int thread_count();

/// Runs body(i) for i in [0, count) across the OpenMP team. If any iteration
/// throws, the exception from the lowest failing index is rethrown after the
/// loop.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  std::exception_ptr first_error;
  std::size_t first_index = std::numeric_limits<std::size_t>::max();
  std::mutex guard;
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(guard);
      if (static_cast<std::size_t>(i) < first_index) {
        first_index = static_cast<std::size_t>(i);
        first_error = std::current_exception();
      }
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace eigenfolio
