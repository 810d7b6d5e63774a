#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bclab {

using Rng = std::mt19937_64;

/// Independent seed for a named component ("topology", "mining", ...) of a
/// run, so one stream can change without perturbing the others.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name);

inline Rng make_rng(std::uint64_t seed, std::string_view name) { return Rng(substream_seed(seed, name)); }

}  // namespace bclab
