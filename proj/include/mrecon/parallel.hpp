#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace mrecon {

inline int default_workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Results land in
/// index order regardless of scheduling. Exceptions are captured per index.
template <typename R>
struct Outcome {
  std::vector<R> values;
  std::vector<std::exception_ptr> errors;

  bool ok(std::size_t i) const { return !errors[i]; }
};

template <typename R, typename Fn>
Outcome<R> parallel_map(std::size_t n, int workers, Fn&& fn) {
  Outcome<R> out{std::vector<R>(n), std::vector<std::exception_ptr>(n)};
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out.values[i] = fn(i);
      } catch (...) {
        out.errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    work();
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  return out;
}

}  // namespace mrecon
