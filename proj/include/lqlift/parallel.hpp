#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lqlift {

/// Logical core count, at least 1.
inline int default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs task(i) for i in [0, count) on up to `jobs` threads. Each task writes
/// only its own output slot, so results do not depend on the schedule. The
/// first exception thrown by a task is rethrown after all threads finish.
template <class Task>
void parallel_for(std::size_t count, int jobs, Task&& task) {
  const std::size_t workers = std::min<std::size_t>(std::max(1, jobs), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace lqlift
