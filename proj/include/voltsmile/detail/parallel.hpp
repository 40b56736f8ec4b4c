#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace voltsmile::detail {

// Worker cap: VOLTSMILE_THREADS if set (>=1), else hardware concurrency.
inline unsigned thread_limit() {
  static const unsigned cached = [] {
    if (const char* env = std::getenv("VOLTSMILE_THREADS")) {
      const long n = std::strtol(env, nullptr, 10);
      if (n >= 1) return static_cast<unsigned>(n);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc ? hc : 1u;
  }();
  return cached;
}

inline bool& in_parallel_region() {
  thread_local bool flag = false;
  return flag;
}

// Runs fn(i) for i in [0, n). Work items must be independent; any result
// ordering is the caller's responsibility (index-addressed output slots keep
// reductions deterministic). Nested calls run serially to avoid thread
// oversubscription. The first exception is rethrown after join.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const unsigned workers = std::min<std::size_t>(thread_limit(), n);
  if (n == 0) return;
  if (workers <= 1 || in_parallel_region()) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      in_parallel_region() = true;
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load(std::memory_order_relaxed)) break;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
          break;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace voltsmile::detail
