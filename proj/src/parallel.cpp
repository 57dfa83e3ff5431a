#include "steindisc/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace steindisc {

std::size_t worker_count(std::size_t requested) {
  std::size_t n = requested;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("STEIN_DISCRETE_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
    } catch (const std::exception&) {
      // Ignore malformed values.
    }
  }
  return std::max<std::size_t>(1, n);
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace steindisc
