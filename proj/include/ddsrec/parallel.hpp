#pragma once

#include <cstddef>
#include <functional>

namespace ddsrec {

/// Worker cap: DDSREC_THREADS if set to a positive integer, else the hardware
/// concurrency (at least 1).
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index runs
/// exactly once; callers write results into per-index slots so the outcome
/// never depends on scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

}  // namespace ddsrec
