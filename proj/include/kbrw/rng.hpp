#pragma once

#include <cstdint>
#include <random>

namespace kbrw {

/// Engine owned by one replicate. Never shared between threads.
using Stream = std::mt19937_64;

/// Deterministic stream for replicate `index` under `seed`. The seed of the
/// engine is a hash of the pair, so the draw sequence of a replicate does not
/// depend on which worker runs it or in which order.
Stream make_stream(std::uint64_t seed, std::uint64_t index);

/// Bijective 64-bit mixer (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

}  // namespace kbrw
