#pragma once

// Seeded random streams. Every consumer receives an explicit engine; a
// stream is identified by (seed, index) so replicas and ensemble chunks can
// be generated independently of scheduling order.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace locfield {

using Engine = std::mt19937_64;

inline Engine make_stream(std::uint64_t seed, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x9e3779b9u};
  return Engine(seq);
}

// Uniform on [0, 1) with 53 random bits. Used instead of the standard
// distributions, whose output is implementation-defined.
inline double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double exponential(Engine& rng, double rate) {
  return -std::log1p(-uniform01(rng)) / rate;
}

// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Engine& rng, std::uint64_t n) {
  const std::uint64_t limit = Engine::max() - (Engine::max() % n + 1) % n;
  std::uint64_t x = rng();
  while (x > limit) x = rng();
  return x % n;
}

// Draws i with probability weights[i] / sum(weights). Weights must not all be zero.
inline std::size_t categorical(Engine& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    last_positive = i;
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return last_positive;
}

}  // namespace locfield
