#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace cartanlab {

/// Process-wide worker count override; 0 means none.
inline unsigned& thread_override() {
  static unsigned n = 0;
  return n;
}

/// Worker count: the override if set, else CARTANLAB_THREADS if it is a
/// positive integer, else the hardware concurrency.
inline unsigned thread_count() {
  if (thread_override() > 0) return thread_override();
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CARTANLAB_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(std::min<long>(v, 1024));
  }
  return hw;
}

/// Runs body(i) for i in [0, n) on a static partition. Work items must write
/// only to their own slots; reductions happen afterwards in index order, so
/// results do not depend on the thread count. The exception from the lowest
/// failing chunk is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body, unsigned threads = thread_count()) {
  if (n == 0) return;
  std::size_t workers = std::min<std::size_t>(std::max(1u, threads), n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t begin = n * w / workers;
    std::size_t end = n * (w + 1) / workers;
    pool.emplace_back([&, w, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace cartanlab
