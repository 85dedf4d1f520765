#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace stpca {

namespace detail {
inline std::atomic<unsigned> max_threads{0};
}  // namespace detail

/// Caps the worker count used by data-parallel loops. 0 means hardware concurrency.
inline void set_max_threads(unsigned n) { detail::max_threads.store(n); }

inline unsigned worker_count() {
  unsigned cap = detail::max_threads.load();
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return cap == 0 ? hw : std::min(cap, hw);
}

/// Runs body(i) for i in [0, n) over contiguous chunks. Each index is visited
/// exactly once; callers write results into per-index slots and reduce them
/// afterwards in index order, so results do not depend on the thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace stpca
