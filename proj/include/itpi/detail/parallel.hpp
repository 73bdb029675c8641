#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace itpi::detail {

// Runs fn(block) for block in [0, n_blocks). Blocks are dealt round-robin to
// workers; callers store per-block results so merge order never depends on
// the worker count.
template <class Fn>
void parallel_blocks(std::size_t n_blocks, unsigned workers, Fn&& fn) {
  if (workers <= 1 || n_blocks <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }
  const unsigned used = static_cast<unsigned>(std::min<std::size_t>(workers, n_blocks));
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(used);
  for (unsigned w = 0; w < used; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t b = w; b < n_blocks; b += used) fn(b);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace itpi::detail
