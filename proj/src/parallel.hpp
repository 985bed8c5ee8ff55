#pragma once

// Static work splitting over std::thread. Each index is processed exactly once
// and results are written to caller-owned slots, so output order never depends
// on scheduling. The first exception thrown by any task is rethrown.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace peerconf::detail {

// Set inside worker threads so nested loops run serially.
inline thread_local bool in_parallel_region = false;

inline std::size_t worker_count(std::size_t tasks) {
  if (in_parallel_region) return 1;
  std::size_t hw = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("PEERCONF_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) hw = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(hw, tasks));
}

template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = worker_count(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    const bool outer = in_parallel_region;
    in_parallel_region = true;
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
    in_parallel_region = outer;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace peerconf::detail
