#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace costroute {

// Stable 64-bit FNV-1a; used to derive per-entity seeds from string ids.
std::uint64_t hash_string(std::string_view text) noexcept;

// Order-sensitive seed combination (splitmix64 finalizer over the pair).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, Rest... rest) noexcept {
  std::uint64_t s = base;
  ((s = mix_seed(s, static_cast<std::uint64_t>(rest))), ...);
  return s;
}

/// Seeded generator. The bit-to-value mappings are written out here instead of
/// using <random> distributions so that sequences do not depend on the
/// standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);

 private:
  std::mt19937_64 engine_;
};

}  // namespace costroute
