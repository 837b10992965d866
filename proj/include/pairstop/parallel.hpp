#pragma once

#include <cstddef>
#include <functional>

namespace pairstop {

/// Worker count: PAIRSTOP_THREADS if set to a positive integer, otherwise
/// std::thread::hardware_concurrency() (at least 1).
std::size_t thread_count();

/// Calls fn(i) for every i in [0, count), spread over at most `threads`
/// workers in contiguous blocks. fn must only write to slot i of its output;
/// the first exception thrown by any call is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  std::size_t threads = thread_count());

}  // namespace pairstop
