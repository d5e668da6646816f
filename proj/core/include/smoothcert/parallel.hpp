#pragma once

#include <cstddef>
#include <functional>

namespace smoothcert {

// 0 -> hardware concurrency (at least 1).
unsigned resolve_threads(unsigned requested);

// Runs body(0..n-1) on up to `threads` workers. Work items grab indices from
// a shared counter, so callers must only write to per-index slots; combined
// with per-index rng streams this keeps results independent of scheduling.
// The first exception thrown by any worker is rethrown after all join.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace smoothcert
