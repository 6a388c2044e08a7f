#pragma once

#include <cstddef>
#include <functional>

namespace snekhorn {

// Worker count used by row-parallel kernels and the bench pool. Defaults to
// SNEKHORN_THREADS when set, else 1.
std::size_t num_threads();
void set_num_threads(std::size_t n);

// Runs body(i) for i in [0, n) over contiguous static chunks. Each index is
// processed exactly once, so per-index results do not depend on the thread count.
// Calls made from inside a worker run serially on that worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace snekhorn
