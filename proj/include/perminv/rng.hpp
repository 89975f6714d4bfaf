#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace perminv {

using Rng = std::mt19937_64;

/// Seed for the generator owned by `role` within run `seed`. Distinct roles
/// give independent streams; the same (seed, role) always gives the same one.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view role);

inline Rng make_rng(std::uint64_t seed, std::string_view role) {
  return Rng(derive_seed(seed, role));
}

}  // namespace perminv
