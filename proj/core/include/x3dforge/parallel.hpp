#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace x3df {

/// Runs body(i) for i in [0, count) on up to `threads` workers with static
/// index partitioning. Each index is processed exactly once by one worker,
/// so results are independent of the thread count.
inline void parallel_for(std::int64_t count, int threads,
                         const std::function<void(std::int64_t)>& body) {
  if (threads <= 1 || count <= 1) {
    for (std::int64_t i = 0; i < count; ++i) body(i);
    return;
  }
  const int workers =
      static_cast<int>(std::min<std::int64_t>(threads, count));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int wi = 0; wi < workers; ++wi) {
    const std::int64_t begin = count * wi / workers;
    const std::int64_t end = count * (wi + 1) / workers;
    pool.emplace_back([begin, end, &body] {
      for (std::int64_t i = begin; i < end; ++i) body(i);
    });
  }
  for (std::thread& th : pool) th.join();
}

}  // namespace x3df
