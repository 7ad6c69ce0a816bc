#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace pubgml {

namespace detail {
inline std::size_t& max_threads_ref() {
  static std::size_t n = 1;
  return n;
}
inline bool& in_worker() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

/// Caps the worker count used by parallel loops. Results never depend on it:
/// every parallel loop writes each index's output to its own slot.
inline void set_max_threads(std::size_t n) { detail::max_threads_ref() = std::max<std::size_t>(1, n); }
inline std::size_t max_threads() { return detail::max_threads_ref(); }

/// Runs fn(i) for i in [0, count) on up to max_threads() workers using a
/// static contiguous partition. Loops nested inside a worker run serially.
/// The first exception thrown is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const std::size_t workers = detail::in_worker() ? 1 : std::min(max_threads(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = count * w / workers;
    const std::size_t hi = count * (w + 1) / workers;
    pool.emplace_back([&, w, lo, hi] {
      detail::in_worker() = true;
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace pubgml
