#pragma once

#include <cstdint>
#include <random>
#include <span>

#include "composenet/errors.hpp"

namespace composenet {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives independent sub-seeds from a base seed. Streams keep RNG consumers
// (spawning, action sampling, evaluation, ...) decoupled so adding draws to
// one does not shift another.
inline uint64_t mix_seed(uint64_t base, uint64_t stream, uint64_t index = 0) {
  return splitmix64(splitmix64(base ^ 0x243f6a8885a308d3ull) + splitmix64(stream) + index);
}

// Deterministic RNG. The engine is std::mt19937 (bit-exact by the standard);
// distributions are implemented here rather than with std:: distribution
// objects, whose sequences vary across standard libraries.
class Rng {
public:
  Rng() : Rng(0) {}
  explicit Rng(uint64_t seed)
      : engine_(static_cast<uint32_t>(splitmix64(seed) & 0xffffffffull)) {}

  uint32_t next_u32() { return engine_(); }

  // Uniform in [0, 1) with 24 bits of mantissa.
  float uniform() { return static_cast<float>(next_u32() >> 8) * (1.0f / 16777216.0f); }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) via multiply-shift.
  int uniform_int(int n) {
    return static_cast<int>((static_cast<uint64_t>(next_u32()) * static_cast<uint64_t>(n)) >> 32);
  }

private:
  std::mt19937 engine_;
};

// Draws an index distributed according to `probs` (CDF inversion). The vector
// must be a valid probability vector; the final index absorbs rounding slack.
inline int sample_categorical(std::span<const float> probs, Rng& rng) {
  if (probs.empty()) throw ConfigError("sample_categorical: empty probability vector");
  const float u = rng.uniform();
  float cdf = 0.0f;
  for (size_t i = 0; i + 1 < probs.size(); ++i) {
    cdf += probs[i];
    if (u < cdf) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

}  // namespace composenet
