#pragma once

#include <functional>

namespace curvreg {

/// Worker cap: CURVREG_THREADS environment variable, where 0 or unset means
/// hardware concurrency. Always at least 1.
int worker_count();

/// Runs fn(i) for i in [begin, end) across up to worker_count() threads.
/// Deterministic as long as each index writes only its own output slot.
/// Exceptions from workers are rethrown (first one wins) after all join.
void parallel_for(int begin, int end, const std::function<void(int)>& fn);

}  // namespace curvreg
