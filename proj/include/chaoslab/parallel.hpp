#ifndef CHAOSLAB_PARALLEL_HPP
#define CHAOSLAB_PARALLEL_HPP

// Block-parallel Monte-Carlo fan-out. Work is cut into fixed-size blocks
// independent of the lane count; each block's partial result is stored at
// its block index and the caller merges them in block order, so results do
// not depend on how many lanes ran.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace chaoslab {

inline constexpr std::size_t kSampleBlock = 2048;

/// Lane cap from CHAOSLAB_THREADS, defaulting to the hardware concurrency.
inline unsigned lane_count() {
  if (const char* env = std::getenv("CHAOSLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(begin, end) over [0, count) in blocks of `block` items and returns
/// the per-block results in block order.
template <class Fn>
auto run_blocks(std::size_t count, unsigned lanes, Fn&& fn, std::size_t block = kSampleBlock)
    -> std::vector<decltype(fn(std::size_t{}, std::size_t{}))> {
  using Result = decltype(fn(std::size_t{}, std::size_t{}));
  const std::size_t nblocks = (count + block - 1) / block;
  std::vector<Result> out(nblocks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= nblocks) return;
      try {
        out[b] = fn(b * block, std::min(count, (b + 1) * block));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };

  const unsigned n = std::max(1u, std::min<unsigned>(lanes, static_cast<unsigned>(nblocks)));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace chaoslab

#endif  // CHAOSLAB_PARALLEL_HPP
