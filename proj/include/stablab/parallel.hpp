#pragma once

// Index-parallel loops. threads <= 1 runs the plain serial loop, which is
// the reference path the parallel one is tested against.

#include <cstddef>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace stablab {

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <class F>
void serial_for(std::size_t n, F&& f) {
  for (std::size_t i = 0; i < n; ++i) f(i);
}

/// Runs f(i) for i in [0, n). The first exception thrown by any iteration
/// is rethrown after the loop.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
#ifdef _OPENMP
  if (threads > 1 && n > 1) {
    std::exception_ptr err;
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long long i = 0; i < count; ++i) {
      try {
        f(static_cast<std::size_t>(i));
      } catch (...) {
#pragma omp critical(stablab_parallel_error)
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    return;
  }
#endif
  (void)threads;
  serial_for(n, f);
}

}  // namespace stablab
