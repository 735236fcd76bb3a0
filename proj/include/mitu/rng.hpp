#pragma once

#include <cmath>
#include <cstdint>

namespace mitu {

// Deterministic xoshiro256** generator with hand-rolled distributions.
// Every stochastic component of the pipeline draws from one of these,
// seeded through derive() so results are independent of scheduling.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    // splitmix64 expansion of the seed into the full state
    uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
  }

  uint64_t next() {
    uint64_t* s = state_;
    const uint64_t result = rotl(s[1] * 5, 7) * 9;
    const uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }

  // uniform in [0,1)
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [lo, hi] inclusive
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + int64_t(uniform() * double(hi - lo + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // standard normal, Box-Muller (one value per call, no cached state)
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
  }

  // normal resampled until |x| <= 2*sigma
  double truncated_normal(double sigma) {
    for (;;) {
      const double x = normal() * sigma;
      if (std::fabs(x) <= 2.0 * sigma) return x;
    }
  }

  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

 private:
  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }
  uint64_t state_[4];
};

// Independent stream keyed by (seed, a, b, c); used for per-sample and
// per-epoch streams so results do not depend on execution order.
inline Rng derive_rng(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  uint64_t x = seed;
  uint64_t h = Rng::splitmix64(x);
  x = h ^ (a * 0x9E3779B97F4A7C15ull);
  h = Rng::splitmix64(x);
  x = h ^ (b * 0xC2B2AE3D27D4EB4Full);
  h = Rng::splitmix64(x);
  x = h ^ (c * 0x165667B19E3779F9ull);
  return Rng(Rng::splitmix64(x));
}

}  // namespace mitu
