#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace eqmo {

/// Worker count used when a caller passes 0: EQMO_WORKERS if set, otherwise
/// the hardware concurrency.
std::size_t default_workers();

/// Runs body(i) for i in [0, n) over `workers` threads in contiguous blocks.
/// Bodies must write only to index-owned state; results never depend on the
/// worker count.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body);

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Generator for simulation path `path` of stream `stream`. The substream is a
/// function of (seed, stream, path) only.
inline std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t path) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream * 0x9E3779B97F4A7C15ULL + path)));
}

}  // namespace eqmo
