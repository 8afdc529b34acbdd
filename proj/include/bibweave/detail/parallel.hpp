#ifndef BIBWEAVE_DETAIL_PARALLEL_HPP
#define BIBWEAVE_DETAIL_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace bibweave::detail {

/// Runs fn(0) .. fn(count-1) on up to `parallelism` worker threads.
/// Callers own result placement by index, which keeps assembly order
/// independent of completion order. fn must not throw; wrap failures into
/// per-index slots instead.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t parallelism, Fn&& fn) {
  if (count == 0) return;
  const std::size_t workers = std::clamp<std::size_t>(parallelism, 1, count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&next, count, &fn] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace bibweave::detail

#endif  // BIBWEAVE_DETAIL_PARALLEL_HPP
