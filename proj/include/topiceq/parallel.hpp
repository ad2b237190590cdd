#pragma once

#include <cstddef>
#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace topiceq {

/// Runs f(i) for i in [0, n) on up to `threads` workers using a static
/// contiguous partition. The first exception thrown (by index) is rethrown.
template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  threads = std::min(threads, n);
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t lo = n * w / threads, hi = n * (w + 1) / threads;
      try {
        for (std::size_t i = lo; i < hi; ++i) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Worker count from an explicit value, else TOPICEQ_THREADS, else 1.
std::size_t resolve_threads(std::size_t requested);

}  // namespace topiceq
