#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace dmlab {

// Runs fn(i) for i in [0, count) over at most `threads` workers. Results
// must be written to per-index slots; the join order is fixed, so callers
// stay deterministic regardless of the thread count.
inline void parallel_for_index(std::int64_t count, int threads,
                               const std::function<void(std::int64_t)>& fn) {
  if (count <= 0) return;
  const int workers = static_cast<int>(
      std::max<std::int64_t>(1, std::min<std::int64_t>(threads, count)));
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::int64_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace dmlab
