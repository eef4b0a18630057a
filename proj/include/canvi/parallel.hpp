#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace canvi {

/// Runs fn(i) for i in [0, n) across up to `workers` threads. Work items must
/// be independent; results must be written to index-addressed slots so the
/// outcome is identical for any worker count. The first exception thrown by
/// any item is rethrown.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t n_threads =
      std::min<std::size_t>(std::max(workers, 1), n);
  if (n_threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += n_threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace canvi
