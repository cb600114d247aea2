#pragma once

#include <cstddef>
#include <functional>

namespace n2i {

/// Worker count: N2I_THREADS if set and positive, otherwise hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n) split into contiguous chunks over worker threads.
/// Each index must write to disjoint output so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace n2i
