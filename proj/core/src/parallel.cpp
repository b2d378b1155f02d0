#include "ipursuit/parallel.hpp"

#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace ipursuit {

namespace {
std::atomic<std::size_t> g_thread_bound{0};  // 0 = use hardware concurrency
}

std::size_t thread_bound() {
  const std::size_t bound = g_thread_bound.load(std::memory_order_relaxed);
  if (bound > 0) return bound;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

void set_thread_bound(std::size_t bound) {
  g_thread_bound.store(bound, std::memory_order_relaxed);
}

void for_each_chunk(std::size_t n, std::size_t chunk_size,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
  const std::size_t workers = std::min(thread_bound(), n_chunks);

  auto run_chunk = [&](std::size_t chunk) {
    const std::size_t begin = chunk * chunk_size;
    const std::size_t end = std::min(begin + chunk_size, n);
    fn(chunk, begin, end);
  };

  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t chunk = next.fetch_add(1, std::memory_order_relaxed);
        if (chunk >= n_chunks || failed.load(std::memory_order_relaxed)) return;
        try {
          run_chunk(chunk);
        } catch (...) {
          if (!failed.exchange(true)) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ipursuit
