#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace graphpde {

inline int effective_threads(int requested, int n_items) {
  int t = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (t < 1) t = 1;
  return std::min(t, n_items);
}

/// Runs fn(item, worker) for item in [0, n) across up to `threads` workers.
/// `worker` is a stable index in [0, threads) so callers can keep per-worker
/// scratch. Work items must be independent; deterministic reductions combine
/// per-item results in index order afterwards. The first exception wins and
/// is rethrown after all workers stop.
inline void parallel_for(int n, const std::function<void(int, int)>& fn,
                         int threads = 0) {
  if (n <= 0) return;
  const int workers = effective_threads(threads, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&](int wid) {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i, wid);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(body, w);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace graphpde
