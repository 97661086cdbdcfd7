#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace nsn {

/// Stream purposes; part of the seed derivation so streams never overlap.
enum class Stream : std::uint64_t { kInit = 1, kShuffle = 2, kDropout = 3, kSynthetic = 4 };

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a base seed and a list of indices (purpose, epoch, step, model...)
/// into one 64-bit seed. Pure, so a resumed run rebuilds the same streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t h = mix64(base);
  for (auto v : path) h = mix64(h ^ mix64(v + 0x632be59bd9b4e019ULL));
  return h;
}

/// Thin wrapper over mt19937_64 with distribution code written out here so the
/// produced numbers do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 24 bits of resolution.
  float uniform_float() { return static_cast<float>(engine_() >> 40) * 0x1.0p-24f; }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound), rejection sampling (unbiased).
  std::uint64_t uniform_index(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  bool bernoulli(double p) { return uniform_double() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace nsn
