#pragma once

#include <functional>

namespace noisecast {

// Process-wide worker count, settable from the CLI (--workers) and the
// NOISECAST_WORKERS environment variable.
int default_workers();
void set_default_workers(int workers);

// Runs fn(i) for i in [0, n).  Cells must be independent; determinism is
// the caller's job (write into pre-sized slots, reduce in index order
// afterwards).  The first exception thrown by any cell is rethrown.
void parallel_for(long n, const std::function<void(long)>& fn,
                  int workers = 0);

}  // namespace noisecast
