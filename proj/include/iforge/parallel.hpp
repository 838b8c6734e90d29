#pragma once

#include <cstddef>
#include <functional>

namespace iforge {

// Worker count for data-parallel loops: INTERP_FORGE_THREADS when set (values
// below 1 read as 1), otherwise the hardware concurrency. Resolved once per
// process.
std::size_t thread_budget();

// Runs fn(i) for every i in [0, n). Indices are split into contiguous ranges,
// one per worker; every index is visited exactly once, so loop bodies that
// write only to their own slot produce results bit-identical to the
// sequential order regardless of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace iforge
