#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace phasenas {

// Philox4x32-10 counter-based generator. A (key, stream) pair selects an
// independent sequence, so weight init, input synthesis and parallel scoring
// never share state: the value at position n is a pure function of
// (key, stream, n).
class Philox {
 public:
  Philox(std::uint64_t key, std::uint64_t stream)
      : key0_(static_cast<std::uint32_t>(key)),
        key1_(static_cast<std::uint32_t>(key >> 32)),
        stream_lo_(static_cast<std::uint32_t>(stream)),
        stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

  std::uint32_t next_u32() {
    if (block_pos_ == 4) refill();
    return block_[block_pos_++];
  }

  // Uniform in [0, 1).
  double next_uniform() {
    return static_cast<double>(next_u32()) * 0x1p-32;
  }

  // Standard normal via Box-Muller; the second draw of each pair is cached.
  double next_normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_normal_;
    }
    // u1 in (0, 1] keeps the log finite.
    const double u1 = (static_cast<double>(next_u32()) + 1.0) * 0x1p-32;
    const double u2 = static_cast<double>(next_u32()) * 0x1p-32;
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_normal_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  float next_normal_f() { return static_cast<float>(next_normal()); }

  void fill_normal(std::span<float> out) {
    for (float& v : out) v = next_normal_f();
  }

  void fill_normal(std::span<float> out, float stddev) {
    for (float& v : out) v = stddev * next_normal_f();
  }

 private:
  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                      std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
  }

  void refill() {
    std::uint32_t c0 = static_cast<std::uint32_t>(counter_);
    std::uint32_t c1 = static_cast<std::uint32_t>(counter_ >> 32);
    std::uint32_t c2 = stream_lo_;
    std::uint32_t c3 = stream_hi_;
    std::uint32_t k0 = key0_;
    std::uint32_t k1 = key1_;
    for (int round = 0; round < 10; ++round) {
      std::uint32_t hi0, lo0, hi1, lo1;
      mulhilo(0xD2511F53u, c0, hi0, lo0);
      mulhilo(0xCD9E8D57u, c2, hi1, lo1);
      const std::uint32_t n0 = hi1 ^ c1 ^ k0;
      const std::uint32_t n1 = lo1;
      const std::uint32_t n2 = hi0 ^ c3 ^ k1;
      const std::uint32_t n3 = lo0;
      c0 = n0;
      c1 = n1;
      c2 = n2;
      c3 = n3;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    block_ = {c0, c1, c2, c3};
    block_pos_ = 0;
    ++counter_;
  }

  std::uint32_t key0_, key1_;
  std::uint32_t stream_lo_, stream_hi_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

// SplitMix64 finalizer; used to derive sub-seeds and stream ids.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ splitmix64(b));
}

}  // namespace phasenas
