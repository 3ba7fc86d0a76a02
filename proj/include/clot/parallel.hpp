#pragma once

#include <cstddef>
#include <functional>

namespace clot {

// Worker cap from CLOT_THREADS (0 or unset = hardware concurrency).
std::size_t resolve_thread_cap();

// Runs fn(i) for i in [0, n) on up to `cap` threads. Each index owns its
// outputs, so results are independent of the worker count.
void parallel_for(std::size_t n, std::size_t cap, const std::function<void(std::size_t)>& fn);

}  // namespace clot
