#pragma once

#include <cstddef>
#include <functional>

namespace steindisc {

/// Worker count: `requested` if nonzero, else the hardware concurrency; capped by the
/// STEIN_DISCRETE_THREADS environment variable when it holds a positive integer.
std::size_t worker_count(std::size_t requested = 0);

/// Runs body(0), …, body(count − 1) on up to `workers` threads. Tasks are claimed from
/// an atomic counter; the first exception thrown by any task is rethrown after all threads join.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body);

}  // namespace steindisc
