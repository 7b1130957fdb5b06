#pragma once

#include <cstddef>
#include <functional>

namespace citune {

/// Worker count: CITUNE_THREADS if set (>= 1), else hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, count). Each index is handled by exactly one
/// worker; callers write results into per-index slots and reduce serially, so
/// results do not depend on the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace citune
