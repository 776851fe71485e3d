#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hexpose {

using Rng = std::mt19937_64;

/// Mixes a seed with a tuple of stream coordinates (level, node, draw, ...)
/// into an independent generator. Same coordinates give the same stream.
Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> coordinates = {});

/// Uniform integer in [0, n). n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Uniform real in [lo, hi).
double uniform_real(Rng& rng, double lo, double hi);

double standard_normal(Rng& rng);

}  // namespace hexpose
