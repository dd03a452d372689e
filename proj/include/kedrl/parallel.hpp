#pragma once

#include <cstddef>
#include <functional>

namespace kedrl {

/// Worker count: KEDRL_THREADS if set and positive, else hardware concurrency (at least 1).
int thread_count();

/// Runs body(i) for i in [0, n). Each index is handled by exactly one worker, so a body that
/// writes only to slot i gives results independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace kedrl
