#pragma once

#include <cstddef>

namespace fsvi {

// Global worker-thread cap for the OpenMP kernels. 0 means "use all
// hardware threads"; 1 disables parallel regions entirely. Set once at
// startup (CLI --threads / FSVI_THREADS); not thread-safe to change while
// kernels are running.
void set_threads(int n);
int threads();

// Resolved thread count (>= 1) after applying the cap.
int effective_threads();

namespace kernels {

// Static row partitioning over [0, n). Each index writes only its own output
// slots, so results are bitwise identical for any thread count.
template <class Body>
void parallel_rows(std::size_t n, const Body& body);

}  // namespace kernels
}  // namespace fsvi

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fsvi::kernels {

template <class Body>
void parallel_rows(std::size_t n, const Body& body) {
#ifdef _OPENMP
  const int nt = fsvi::effective_threads();
  if (nt > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(nt)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      body(static_cast<std::size_t>(i));
    }
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace fsvi::kernels
