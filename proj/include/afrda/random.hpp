#pragma once

#include "afrda/tensor.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace afrda {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n)
{
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Seeds a generator from a (seed, stream, index) triple so independent
/// streams never share state.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t index = 0)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

/// Uniform in +-1/sqrt(fan_in).
Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng);

std::string serialize_rng(const Rng& rng);
Rng deserialize_rng(const std::string& text);

}  // namespace afrda
