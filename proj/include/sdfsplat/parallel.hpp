#pragma once

#include <cstddef>
#include <functional>

namespace sdfsplat {

/// Worker count used by parallel_for. Defaults to the SDFSPLAT_THREADS
/// environment variable, else the hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Calls body(i) for every i in [0, n). Iterations are handed out in chunks;
/// the body must not depend on execution order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, std::size_t grain = 1);

}  // namespace sdfsplat
