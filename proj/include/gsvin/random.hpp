#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gsvin {

using Rng = std::mt19937_64;

/// Independent generator for a (seed, stream...) tuple. std::seed_seq and mt19937_64 are
/// fully specified by the standard, so streams are identical across platforms.
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream);

/// Uniform integer in [0, n) by rejection (portable, unlike std::uniform_int_distribution).
std::uint64_t uniform_below(Rng& rng, std::uint64_t n);

/// Uniform double in [0, 1) with 53 random bits.
double uniform_unit(Rng& rng);

}  // namespace gsvin
