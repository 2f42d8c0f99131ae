#pragma once

#include <cstddef>
#include <functional>

namespace driftgate {

/// Upper bound on worker threads used by internal parallel loops. Defaults to
/// DRIFTGATE_THREADS when set, otherwise the hardware concurrency.
std::size_t max_threads();
void set_max_threads(std::size_t n);

/// Runs body(i) for i in [0, n) on up to max_threads() threads. Exceptions
/// from the body are rethrown on the calling thread (first one wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace driftgate
