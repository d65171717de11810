// SPDX-License-Identifier: Apache-2.0
//
// Seeded randomness helpers. Everything here is deterministic for a fixed
// seed across platforms: mt19937_64 has a standard-mandated sequence and the
// uniform/categorical draws below avoid implementation-defined distributions.
#pragma once

#include <cstdint>
#include <random>

#include "hybridgrad/prob_kernels.hpp"

namespace hybridgrad {

using Rng = std::mt19937_64;

/// Uniform draw in [0, 1) from the top 53 bits of the generator.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform draw in [-scale, scale].
inline double uniform_symmetric(Rng& rng, double scale) {
  return (2.0 * uniform01(rng) - 1.0) * scale;
}

/// splitmix64 mix; used to derive independent stream seeds from a base seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Inverse-CDF draw from a probability vector. The final bucket absorbs any
/// rounding slack in the cumulative sum.
template <typename Derived>
Eigen::Index sample_categorical(const Eigen::ArrayBase<Derived>& probs, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  const Eigen::Index n = probs.size();
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  return n - 1;
}

/// Logit vector with i.i.d. entries uniform in [-scale, scale].
inline LogitVec random_logits(Eigen::Index n, double scale, Rng& rng) {
  LogitVec z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = uniform_symmetric(rng, scale);
  return z;
}

}  // namespace hybridgrad
