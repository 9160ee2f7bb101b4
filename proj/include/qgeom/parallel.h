#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

#include "qgeom/types.h"

namespace qgeom {

/// Thread budget for internal loops: hardware concurrency, capped by the
/// QGEOM_THREADS environment variable when set.
inline int thread_budget() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("QGEOM_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

/// Runs fn(i) for i in [0, count), split across threads. Callers write
/// results by index and reduce sequentially afterwards, so the outcome is
/// independent of the thread count.
template <typename Fn>
void parallel_for(Index count, Fn&& fn) {
  const int threads = static_cast<int>(
      std::min<Index>(thread_budget(), std::max<Index>(count / 256, 1)));
  if (threads <= 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const Index chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const Index lo = t * chunk;
    const Index hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (Index i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace qgeom
