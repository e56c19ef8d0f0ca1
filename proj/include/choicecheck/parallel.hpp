#pragma once

#include <cstddef>
#include <functional>

namespace choicecheck {

// Worker count: explicit request if positive, else CHOICE_CHECK_THREADS, else
// hardware concurrency. Always at least one.
std::size_t resolve_threads(std::size_t requested = 0);

// Runs fn(i) for i in [0, n) across `threads` workers. Work is handed out by an
// atomic counter, so callers must write results into index-addressed slots.
// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace choicecheck
