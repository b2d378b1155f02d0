#pragma once

#include <cstddef>
#include <functional>

namespace ipursuit {

/// Upper bound on worker threads, set once by the CLI --threads flag.
/// Results never depend on it; it only bounds concurrency.
std::size_t thread_bound();
void set_thread_bound(std::size_t bound);

/// Splits [0, n) into fixed-size chunks and runs fn(chunk_index, begin, end),
/// possibly on several workers. Chunk boundaries depend only on n and
/// chunk_size, so per-chunk results are identical for any worker count;
/// callers merge per-chunk outputs in chunk-index order.
void for_each_chunk(std::size_t n, std::size_t chunk_size,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace ipursuit
