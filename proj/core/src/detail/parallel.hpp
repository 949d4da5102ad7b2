#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace protobank::detail {

// Runs fn(worker, begin, end) over contiguous, disjoint slices of [0, n),
// one slice per worker. Each output element must be written by exactly one
// slice; then results are independent of the worker count by construction.
// Returns the number of slices actually used.
inline std::size_t parallel_ranges(
    std::size_t n, std::size_t workers,
    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return 0;
  if (workers > n) workers = n;
  if (workers <= 1) {
    fn(0, 0, n);
    return 1;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  std::size_t chunk = n / workers, extra = n % workers, begin = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t end = begin + chunk + (w < extra ? 1 : 0);
    threads.emplace_back(fn, w, begin, end);
    begin = end;
  }
  for (auto& t : threads) t.join();
  return workers;
}

}  // namespace protobank::detail
