#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace ipinn {

// Deterministic splittable RNG. Each named purpose ("balls", "surface",
// "init", ...) gets its own stream derived from (seed, label), so two
// experiment variants that share a seed consume identical draws for the
// purposes they have in common regardless of how the other purposes differ.
//
// Core generator is SplitMix64; distributions are hand-rolled so output is
// bit-identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t state) : state_(state) {}

  static Rng stream(std::uint64_t seed, std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the label
    for (char c : label) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ull;
    }
    return Rng(mix(seed ^ mix(h)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform on [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free multiply-shift; bias is negligible for n << 2^64 and
    // the distribution is identical across platforms.
    return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ipinn
