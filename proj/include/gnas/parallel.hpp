#pragma once

#include <cstddef>
#include <functional>

namespace gnas::parallel {

/// Fan-out cap for read-only evaluation loops; 1 = fully sequential.
void set_threads(int n);
int threads();

/// Runs fn(0..n-1), splitting the range over the configured thread budget.
/// Results must go to pre-allocated slots so the outcome is independent of
/// completion order. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace gnas::parallel
