#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace defglm {

/// The engine used by every stochastic operation. Callers own their streams;
/// nothing in the library holds a global generator.
using Rng = std::mt19937_64;

/// Mixes a base seed with a list of integer keys (replicate index, fold index,
/// method id, ...) into an independent-looking 64-bit seed. Order of keys
/// matters. Uses the splitmix64 finalizer.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

/// Convenience: a fresh engine seeded by derive_seed.
Rng make_stream(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal deviate (Marsaglia polar method, one value per call).
double standard_normal(Rng& rng);

}  // namespace defglm
