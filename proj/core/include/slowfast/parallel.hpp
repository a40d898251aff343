#pragma once

#include <cstddef>
#include <functional>

namespace slowfast {

// Worker count: SLOWFAST_THREADS if set, else hardware concurrency.
std::size_t worker_count();

// Runs body(i) for i in [0, count) on a small thread pool. Work items must
// write only to their own slot; the first exception (by index) is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace slowfast
