#include "vtrig/parallel.hpp"

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace vtrig {

namespace {
std::atomic<int> g_jobs{0};
}

void set_default_jobs(int jobs) { g_jobs.store(jobs < 0 ? 0 : jobs); }

int default_jobs() {
  int j = g_jobs.load();
  if (j <= 0) {
    const unsigned hc = std::thread::hardware_concurrency();
    j = hc == 0 ? 1 : static_cast<int>(hc);
  }
  return j;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  int jobs) {
  if (n == 0) return;
  if (jobs <= 0) jobs = default_jobs();
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      const std::size_t lo = n * w / workers;
      const std::size_t hi = n * (w + 1) / workers;
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace vtrig
