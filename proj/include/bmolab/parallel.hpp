#pragma once

#include <cstddef>
#include <functional>

namespace bmolab {

/// Worker count: BMOLAB_THREADS if set and positive, else hardware concurrency.
unsigned thread_count();

/// Calls body(i) for i in [0, n) across the worker pool. Iterations must be
/// independent; results are written by index so reductions stay ordered.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace bmolab
