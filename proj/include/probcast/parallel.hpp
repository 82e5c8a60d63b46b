#pragma once

#include <cstddef>
#include <functional>

namespace probcast {

// Honors PROBCAST_THREADS; otherwise hardware concurrency capped at 8.
std::size_t default_thread_count();

// Runs fn(0..n-1) across contiguous chunks. Results must be written to
// index-addressed slots so scheduling cannot change the outcome.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace probcast
