#pragma once

#include <cstdint>
#include <functional>

namespace mitu {

// Number of worker threads (MITU_THREADS env var, else hardware concurrency).
int thread_count();

// Runs fn(begin, end) over a static partition of [0, n) into contiguous
// chunks, one chunk per worker. Each output element is produced by exactly
// one chunk in a fixed order, so results are bitwise identical for any
// thread count. Nested calls run inline.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace mitu
