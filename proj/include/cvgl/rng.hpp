#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace cvgl {

/// Deterministic random stream. Wraps std::mt19937_64 (fully specified by the
/// standard) and draws uniforms/gaussians by hand so that results are
/// bit-identical across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of randomness.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes two uniforms per pair.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    have_spare_ = true;
    return mag * std::cos(two_pi * u2);
  }

  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free modulo is fine here: n is tiny relative to 2^64 and the
    // bias is far below anything the tests can observe, but we keep the
    // rejection loop so sequences are well defined for any n.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// FNV-1a hash of a byte string, used to derive per-name sub-seeds.
inline std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Mixes a 64-bit value (splitmix64 finalizer).
inline std::uint64_t mix_u64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Seed for a named substream of a global seed. Used for per-parameter
/// initialization and per-(scene, corruption) noise so runs are reproducible
/// regardless of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view name) {
  return mix_u64(global_seed ^ hash_name(name));
}

inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view name,
                                 std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t h = global_seed ^ hash_name(name);
  h = mix_u64(h ^ mix_u64(a));
  h = mix_u64(h ^ mix_u64(b ^ 0x5851f42d4c957f2dull));
  return h;
}

}  // namespace cvgl
