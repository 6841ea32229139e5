#pragma once

#include <cstddef>
#include <functional>

namespace mcma {

/// Worker count: MCMA_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t thread_count();

/// Calls fn(i) for i in [0, n) on up to thread_count() threads. Callers write
/// into per-index slots and reduce afterwards, so results do not depend on
/// scheduling. The first exception thrown by any call is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mcma
