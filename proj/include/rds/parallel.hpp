#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace rds {

/// Evaluates fn(unit) for unit in [0, units) on up to `workers` threads and
/// returns the results in unit order. Units are assigned round-robin; the
/// result never depends on the worker count.
template <class Fn>
auto parallel_map(std::size_t units, std::size_t workers, Fn&& fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> out(units);
  if (workers <= 1 || units <= 1) {
    for (std::size_t u = 0; u < units; ++u) out[u] = fn(u);
    return out;
  }
  const std::size_t nthreads = workers < units ? workers : units;
  std::vector<std::exception_ptr> errors(nthreads);
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (std::size_t t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t u = t; u < units; u += nthreads) out[u] = fn(u);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace rds
