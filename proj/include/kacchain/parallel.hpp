#pragma once

#include <cstddef>
#include <functional>

namespace kac {

// Runs body(i) for i in [0, n) on up to `workers` threads (0: hardware
// concurrency). Each index is handled exactly once; callers write results per
// index so the outcome does not depend on the worker count.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

int resolve_workers(int workers);

}  // namespace kac
