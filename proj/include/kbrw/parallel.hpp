#pragma once

#include <cstddef>
#include <functional>

namespace kbrw {

/// Number of workers to use when the caller passes 0.
unsigned default_threads();

/// Runs body(i) for i in [0, count) on `threads` workers. Indices are split
/// into interleaved static slices; body must only write to slot i of its
/// outputs so the result is independent of scheduling. Exceptions thrown by
/// body are rethrown on the calling thread (the first one wins).
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace kbrw
