#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tempseg::detail {

// Worker count for per-pixel loops. TEMPSEG_THREADS caps it; 0, unset or
// unparsable means "use the hardware count".
inline unsigned thread_budget() {
  long requested = 0;
  if (const char* env = std::getenv("TEMPSEG_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) requested = v;
  }
  if (requested > 0) return static_cast<unsigned>(requested);
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1u;
}

// Runs fn(row_begin, row_end) over [0, rows) split into contiguous chunks.
// Chunking must not affect results: callers only write per-row outputs.
template <typename Fn>
void parallel_rows(int rows, Fn&& fn) {
  const unsigned budget =
      std::min<unsigned>(thread_budget(), rows > 0 ? static_cast<unsigned>(rows) : 1u);
  if (budget <= 1 || rows <= 1) {
    fn(0, rows);
    return;
  }
  const int chunk = (rows + static_cast<int>(budget) - 1) / static_cast<int>(budget);
  std::vector<std::thread> workers;
  workers.reserve(budget);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (int begin = 0; begin < rows; begin += chunk) {
    const int end = std::min(rows, begin + chunk);
    workers.emplace_back([&, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace tempseg::detail
