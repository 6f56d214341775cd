#include "curvreg/threading.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace curvreg {

int worker_count() {
  static const int cached = [] {
    long requested = 0;
    if (const char* env = std::getenv("CURVREG_THREADS")) {
      char* end = nullptr;
      requested = std::strtol(env, &end, 10);
      if (end == env || requested < 0) requested = 0;
    }
    if (requested == 0) {
      unsigned hw = std::thread::hardware_concurrency();
      requested = hw == 0 ? 1 : static_cast<long>(hw);
    }
    return static_cast<int>(requested < 1 ? 1 : requested);
  }();
  return cached;
}

void parallel_for(int begin, int end, const std::function<void(int)>& fn) {
  const int n = end - begin;
  if (n <= 0) return;

  int workers = worker_count();
  if (workers > n) workers = n;
  if (workers == 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }

  std::atomic<int> cursor{begin};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto body = [&] {
    for (;;) {
      int i = cursor.fetch_add(1);
      if (i >= end) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();

  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace curvreg
