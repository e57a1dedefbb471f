#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace textessence::detail {

// Runs fn(i) for every i in [0, count). Each index is handled by exactly one
// worker, so writes into per-index output slots need no synchronisation and
// results do not depend on the worker count. The first exception thrown by
// any worker is rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn, std::size_t max_workers = 0) {
  std::size_t workers = max_workers != 0 ? max_workers : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1 || count < 64) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace textessence::detail
