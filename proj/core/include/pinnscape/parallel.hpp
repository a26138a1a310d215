#pragma once

#include <cstddef>
#include <functional>

namespace pinnscape {

/// Number of worker threads used by the probes; 0 means hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Calls body(i) for i in [0, n) on up to thread_count() threads. Results
/// must be written to per-index slots so the outcome does not depend on
/// scheduling. The first exception thrown by any body is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace pinnscape
