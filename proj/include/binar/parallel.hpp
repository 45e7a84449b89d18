#pragma once

#include <cstddef>
#include <functional>

namespace binar {

/// Runs body(i) for i in [0, count) on up to `threads` worker threads.
/// Work items are claimed dynamically; callers must write results by index
/// so the outcome is independent of scheduling. The first exception thrown
/// by any item is rethrown after all workers stop.
void parallel_for(std::size_t count, int threads,
                  const std::function<void(std::size_t)>& body);

/// Worker count to use when the caller asks for `requested` (<= 0 means
/// hardware concurrency).
int resolve_threads(int requested);

}  // namespace binar
