#pragma once

#include <cstddef>
#include <functional>

namespace qmc {

// Worker count: QMC_THREADS when set (>= 1), else hardware concurrency.
unsigned effective_threads();

// Static partition of [0, n) into contiguous chunks, one per worker.
// Workers write only to disjoint index slots, so results are identical to a
// sequential run regardless of the thread count. The first exception (by
// chunk order) is rethrown.
void parallel_for_chunks(size_t n, unsigned threads,
                         const std::function<void(size_t, size_t)>& body);
void parallel_for_chunks(size_t n, const std::function<void(size_t, size_t)>& body);

} // namespace qmc
