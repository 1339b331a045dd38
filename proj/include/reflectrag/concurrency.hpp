#pragma once

#include <cstddef>
#include <functional>

namespace reflectrag {

/// Runs `task(i)` for every i in [0, count) on at most `max_in_flight` threads.
/// Each index is visited exactly once. The first exception thrown by a task is
/// rethrown after all workers have stopped; remaining indices are skipped.
void parallel_for(std::size_t count, std::size_t max_in_flight,
                  const std::function<void(std::size_t)>& task);

} // namespace reflectrag
