// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace kunveil {

// Worker count: explicit request wins, then KERNEL_UNVEIL_THREADS, then
// hardware concurrency. Always at least 1.
inline int thread_budget(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("KERNEL_UNVEIL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(0..n_tasks-1) across up to `threads` workers pulling from a shared
// counter. fn must confine its writes to per-index slots. The first escaped
// exception is rethrown on the calling thread after all workers join.
template <typename Fn>
inline void parallel_for(int n_tasks, int threads, Fn&& fn) {
  if (n_tasks <= 0) return;
  threads = std::min(threads, n_tasks);
  if (threads <= 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    while (!failed.load(std::memory_order_relaxed)) {
      const int i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n_tasks) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace kunveil
