#pragma once

#include <exception>
#include <functional>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace drsls {

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Evaluates fn(i) for i in [0, n) and returns the results in index order.
// threads <= 1 runs the plain serial loop, which doubles as the reference
// implementation the tests compare the OpenMP path against. Tasks must not
// share mutable state; exceptions are captured per task and the first one
// (by index) is rethrown after the loop so OpenMP never unwinds across the
// parallel region.
template <class T, class Fn>
std::vector<T> parallel_map(int n, int threads, Fn&& fn) {
  std::vector<T> out(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
#ifdef _OPENMP
  if (threads > 1 && n > 1) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (int i = 0; i < n; ++i) {
      try {
        out[static_cast<std::size_t>(i)] = fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    return out;
  }
#endif
  (void)threads;
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = fn(i);
  return out;
}

}  // namespace drsls
