#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace jumpepr {

inline int default_thread_count() {
  unsigned hc = std::thread::hardware_concurrency();
  if (hc == 0) hc = 1;
  return static_cast<int>(std::min(hc, 8u));
}

// Static block partition of [0, n). Results must be written to preallocated
// per-index slots so the reduction order is independent of scheduling.
template <class F>
void parallel_for(long n, int threads, F&& body) {
  if (n <= 0) return;
  threads = std::max(1, std::min<long>(static_cast<long>(threads), n) > 0
                            ? std::min(threads, static_cast<int>(n))
                            : 1);
  if (threads <= 1 || n < 2) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  const long chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const long lo = static_cast<long>(t) * chunk;
    const long hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, lo, hi]() {
      try {
        for (long i = lo; i < hi; ++i) {
          if (failed.load(std::memory_order_relaxed)) return;
          body(i);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
        failed.store(true);
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace jumpepr
