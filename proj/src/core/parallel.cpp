#include "physdiff/core/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace physdiff {

std::size_t worker_count()
{
  if (char const *env = std::getenv("PHYSDIFF_THREADS")) {
    try {
      long const v = std::stol(env);
      if (v > 0) { return static_cast<std::size_t>(v); }
    } catch (std::exception const &) {
      // fall through to the hardware default
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::function<void(std::size_t)> const &fn)
{
  std::size_t const workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) { error = std::current_exception(); }
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back(work);
  }
  for (auto &t : pool) {
    t.join();
  }
  if (error) { std::rethrow_exception(error); }
}

} // namespace physdiff
