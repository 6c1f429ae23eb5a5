#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fracbayes {

/// How a data-parallel kernel is executed. Serial is the reference path
/// kept for testing; Parallel uses OpenMP when compiled in and degrades
/// to the serial loop otherwise.
enum class ExecPolicy { Serial, Parallel };

template <class Fn>
void parallel_for(int n, ExecPolicy policy, Fn&& body) {
  if (policy == ExecPolicy::Parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < n; ++i) body(i);
  } else {
    for (int i = 0; i < n; ++i) body(i);
  }
}

inline int hardware_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_thread_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

/// Deterministic per-item RNG seed, independent of thread scheduling.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 step over master ^ index keeps streams well separated.
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace fracbayes
