#pragma once

#include <cstddef>
#include <functional>

namespace drivemap {

/// Name of the environment variable that caps worker threads.
inline constexpr const char* kThreadsEnvVar = "LOKI_THREADS";

/// Resolves a worker count. `requested <= 0` means "hardware concurrency".
/// The result is capped by LOKI_THREADS when that variable holds a positive integer.
int resolve_thread_count(int requested = 0);

/// Runs `body(begin, end)` over `[0, count)` split into at most `threads` contiguous chunks.
/// Chunk boundaries depend only on `count` and the thread count.
void parallel_for_chunks(
    std::size_t count,
    int threads,
    const std::function<void(std::size_t begin, std::size_t end)>& body);

} // namespace drivemap
