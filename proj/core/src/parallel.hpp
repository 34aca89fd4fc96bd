#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace dempref::detail {

// Runs fn(i) for i in [0, count) on up to `threads` workers. Jobs are handed
// out dynamically; callers write results into per-index slots.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  const int workers = std::clamp(threads, 1, std::max(count, 1));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace dempref::detail
