#pragma once

#include <cstddef>
#include <functional>

namespace neurn {

// Process-wide worker count used by parallel_for. Zero means "use the
// hardware concurrency".
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs body(i) for i in [0, n) on up to thread_count() workers. Work is
// split into contiguous blocks; callers must write to disjoint outputs.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace neurn
