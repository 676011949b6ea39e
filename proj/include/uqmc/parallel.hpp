#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace uqmc {

/// Worker count for index-parallel loops. Every loop writes results by index,
/// so output does not depend on the number of workers.
struct Executor {
  unsigned workers = 1;
};

/// Calls fn(i) for i in [0, n), splitting the range into contiguous chunks.
/// If any call throws, the exception from the lowest failing index is
/// rethrown on the caller, so failures are reported the same way for any
/// worker count.
template <class Fn>
void parallel_for(const Executor& exec, std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, exec.workers), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::size_t failed_index = n;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&, begin, end] {
      std::size_t i = begin;
      try {
        for (; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace uqmc
