#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace nmfcpd {

// Thread count resolution order: explicit set_thread_count() (tests),
// NMFCPD_THREADS environment variable, hardware concurrency.
inline std::atomic<int>& thread_count_override() {
  static std::atomic<int> value{0};
  return value;
}

inline void set_thread_count(int n) { thread_count_override().store(n > 0 ? n : 0); }

inline int thread_count() {
  const int forced = thread_count_override().load();
  if (forced > 0) return forced;
  if (const char* env = std::getenv("NMFCPD_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs body(i) for i in [0, n). Each index writes only its own slot in the
/// caller's output, so scheduling order cannot affect results; reductions are
/// done sequentially by the caller afterwards. The first exception thrown by
/// any worker is rethrown on the calling thread.
template <typename Body>
void parallel_for(long n, Body&& body) {
  if (n <= 0) return;
  const int workers = std::min<long>(thread_count(), n);
  if (workers <= 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<long> cursor{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run = [&]() {
    for (;;) {
      const long i = cursor.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();

  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace nmfcpd
