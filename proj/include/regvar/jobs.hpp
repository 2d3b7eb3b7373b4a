#pragma once

#include <cstddef>
#include <functional>

namespace regvar {

/// Runs fn(0..count-1) on up to `jobs` worker threads. With jobs > 1 each worker
/// limits its OpenMP team to one thread. The first exception thrown is rethrown.
void run_jobs(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

} // namespace regvar
