#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace sfr {

/// Execution knobs shared by the batched kernels. Work is cut into fixed-size
/// chunks; results are reduced per worker and then in worker order, so a given
/// thread count always yields the same floating-point result.
struct ExecPolicy {
  int threads = 1;
  std::size_t chunk = 256;
};

/// Calls fn(chunk_index, worker) for chunk_index in [0, chunks), splitting the
/// range into contiguous blocks, one per worker.
template <typename Fn>
void parallel_chunks(std::size_t chunks, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(threads, static_cast<int>(chunks))));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c, std::size_t{0});
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t lo = w * chunks / workers, hi = (w + 1) * chunks / workers;
        for (std::size_t c = lo; c < hi; ++c) fn(c, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::size_t worker_count(std::size_t chunks, int threads) {
  return static_cast<std::size_t>(std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::size_t>(chunks, 1)))));
}

}  // namespace sfr
