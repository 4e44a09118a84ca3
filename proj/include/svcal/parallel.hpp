#pragma once

#include <atomic>
#include <cstdint>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace svcal::par {

inline std::atomic<int>& thread_limit() {
  static std::atomic<int> limit{0};  // 0 = hardware default
  return limit;
}

/// Caps the worker count for all parallel kernels (0 restores the default).
inline void set_max_threads(int n) { thread_limit().store(n); }

inline int max_threads() {
  int n = thread_limit().load();
  if (n > 0) return n;
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// OpenMP kernel over [0, n). The body must only write state owned by
/// index i; results are then identical for any thread count.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
#ifdef _OPENMP
  const auto m = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(svcal::par::max_threads())
  for (std::int64_t i = 0; i < m; ++i) body(static_cast<std::size_t>(i));
#else
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

/// Serial reference loop with the same contract as parallel_for.
template <typename F>
void serial_for(std::size_t n, F&& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace svcal::par
