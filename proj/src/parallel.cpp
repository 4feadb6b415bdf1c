#include "fsvi/parallel.hpp"

#include <atomic>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fsvi {

namespace {
std::atomic<int> g_threads{0};  // 0 = all hardware threads
}

void set_threads(int n) { g_threads.store(n < 0 ? 0 : n); }

int threads() { return g_threads.load(); }

int effective_threads() {
  int cap = g_threads.load();
  if (cap == 1) return 1;
#ifdef _OPENMP
  int hw = omp_get_max_threads();
#else
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
#endif
  if (cap == 0 || cap > hw) return hw;
  return cap;
}

}  // namespace fsvi
