#pragma once

#include <functional>

namespace hwctrl {

/// Worker count: explicit request if > 0, else HWCTRL_THREADS, else hardware concurrency.
int resolve_threads(int requested = 0);

/// Runs body(k) for k in [0, n) on up to `threads` workers. Work is split by index, so
/// results written to per-index slots are independent of the thread count.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

}  // namespace hwctrl
