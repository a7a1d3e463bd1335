#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace spinner {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(i) for i in [begin, end) on up to `threads` workers. Tasks
/// must write only to their own output slots so results do not depend on
/// scheduling. The first exception thrown by a worker is rethrown.
inline void parallel_for(int begin, int end, int threads,
                         const std::function<void(int)>& body) {
  const int count = end - begin;
  if (count <= 0) return;
  threads = std::min(resolve_threads(threads), count);
  if (threads <= 1) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }

  std::atomic<int> next(begin);
  std::atomic<bool> failed(false);
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&]() {
    while (!failed.load(std::memory_order_relaxed)) {
      const int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= end) break;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace spinner
