#ifndef PREMIA_PARALLEL_HPP
#define PREMIA_PARALLEL_HPP

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace premia {

/// Worker count: PREMIA_THREADS when set, hardware concurrency otherwise.
inline unsigned worker_count() {
  if (const char* env = std::getenv("PREMIA_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Run fn(begin, end) over disjoint chunks of [0, n). Results written to
/// disjoint slots are deterministic regardless of worker count.
inline void parallel_for(std::uint64_t n, const std::function<void(std::uint64_t, std::uint64_t)>& fn,
                         unsigned workers = 0) {
  if (workers == 0) workers = worker_count();
  if (n == 0) return;
  workers = static_cast<unsigned>(std::min<std::uint64_t>(workers, n));
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const std::uint64_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::uint64_t b = static_cast<std::uint64_t>(w) * chunk;
    const std::uint64_t e = std::min<std::uint64_t>(b + chunk, n);
    if (b >= e) break;
    threads.emplace_back([&, b, e, w] {
      try {
        fn(b, e);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace premia

#endif
