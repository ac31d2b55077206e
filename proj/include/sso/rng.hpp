#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace sso {

// splitmix64 finalizer, used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

inline std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return seed_mix(seed_mix(a, b), c);
}

inline std::uint64_t seed_mix(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                              std::uint64_t d) {
  return seed_mix(seed_mix(a, b, c), d);
}

// FNV-1a, for deriving per-scene seeds from string ids.
inline std::uint64_t hash_str(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// mt19937_64 with hand-rolled distributions. The engine's output sequence is
// fixed by the standard; std::uniform_* are not, so every draw goes through
// the methods below to keep artifacts reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, n), n >= 1. Rejection sampling on the top range.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % n);
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  // Uniform double in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; one value per call, the pair's second half is discarded so the
  // draw count per sample stays fixed.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  // Normal re-sampled until |x - mean| <= 2 stddev.
  double truncated_normal(double mean, double stddev) {
    double v = normal(mean, stddev);
    while (std::abs(v - mean) > 2.0 * stddev) v = normal(mean, stddev);
    return v;
  }

  std::string serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  static Rng deserialize(const std::string& state) {
    Rng r(0);
    std::istringstream is(state);
    is >> r.engine_;
    return r;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sso
