#pragma once

#include <cstdint>
#include <random>

namespace nzp {

// Stateless 64-bit mixer (splitmix64 finalizer). Used to derive independent
// per-coefficient streams so that any rank can reproduce any coefficient
// without communication.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return mix64(mix64(mix64(a) ^ b) ^ c);
}

// Uniform double in [0,1) from 64 random bits.
constexpr double unit_double(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Uniform double in [-1,1).
constexpr double symmetric_double(std::uint64_t bits) {
  return 2.0 * unit_double(bits) - 1.0;
}

// mt19937_64 engine with explicit output mappings. The engine's bit stream is
// pinned by the standard; std::uniform_*_distribution is not, so we map the
// raw words ourselves to keep generated matrices identical across toolchains.
class Random {
 public:
  explicit Random(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_word() { return eng_(); }

  // Uniform on [0, bound), bound >= 1. Rejection-free modulo bias is
  // negligible for the bounds used here, but rejection keeps it exact.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % bound;
  }

  // Uniform on the inclusive integer interval [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  double symmetric() { return symmetric_double(eng_()); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace nzp
