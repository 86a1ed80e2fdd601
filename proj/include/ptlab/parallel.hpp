#pragma once

#include <cstddef>
#include <functional>

namespace ptlab {

// Worker count for read-only evaluation loops: PT_LAB_THREADS when set,
// otherwise hardware concurrency.
int eval_worker_count();

// Runs fn(begin, end, worker) over a partition of [0, n) across workers.
// fn must write only to outputs owned by its own index range, so results do
// not depend on the worker count. Exceptions are rethrown on the caller.
void parallel_ranges(size_t n, const std::function<void(size_t, size_t, int)>& fn);

}  // namespace ptlab
