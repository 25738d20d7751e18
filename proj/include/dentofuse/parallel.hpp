#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace dfuse {

/// Global worker count for data-parallel loops (CLI --threads).
/// 0 means "use hardware concurrency".
void set_thread_count(int n);
int thread_count();

/// Runs fn(i) for i in [0, n). Each index writes only its own outputs, so
/// results are identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// Chunked variant: fn(begin, end) over disjoint ranges.
void parallel_for_chunked(std::size_t n,
                          const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace dfuse
