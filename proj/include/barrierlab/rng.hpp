/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#ifndef BARRIERLAB_RNG_HPP
#define BARRIERLAB_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace barrierlab {

// Philox 4x32-10 counter-based generator (Salmon et al., SC 2011).
// A draw is a pure function of (key, counter): streams indexed by
// (seed, path_index, step, slot) are reproducible in any evaluation
// order and across platforms.
namespace philox {

constexpr std::uint32_t kW32A = 0x9E3779B9u;
constexpr std::uint32_t kW32B = 0xBB67AE85u;
constexpr std::uint32_t kM4x32A = 0xD2511F53u;
constexpr std::uint32_t kM4x32B = 0xCD9E8D57u;

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline void mul_hi_lo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

inline Counter round_once(const Counter& c, const Key& k) {
  std::uint32_t hi0, lo0, hi1, lo1;
  mul_hi_lo(kM4x32A, c[0], hi0, lo0);
  mul_hi_lo(kM4x32B, c[2], hi1, lo1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline Counter block(Counter c, Key k) {
  for (int r = 0; r < 10; ++r) {
    c = round_once(c, k);
    if (r < 9) {
      k[0] += kW32A;
      k[1] += kW32B;
    }
  }
  return c;
}

}  // namespace philox

/// Inverse of the standard normal CDF, AS 241 (PPND16).  Pure rational
/// arithmetic plus sqrt/log, so results are bit-identical across
/// platforms; absolute error below 1e-15 over (0, 1).
inline double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inverse_normal_cdf: p must be in (0,1)");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) *
                    r +
                4.5921953931549871457e+4) *
                   r +
               1.3731693765509461125e+4) *
                  r +
              1.9715909503065514427e+3) *
                 r +
             1.3314166789178437745e+2) *
                r +
            3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) *
                    r +
                2.1213794301586595867e+4) *
                   r +
               5.3941960214247511077e+3) *
                  r +
              6.8718700749205790830e+2) *
                 r +
             4.2313330701600911252e+1) *
                r +
            1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) *
                   r +
               1.27045825245236838258e+0) *
                  r +
              3.64784832476320460504e+0) *
                 r +
             5.76949722146069140550e+0) *
                r +
            4.63033784615654529590e+0) *
               r +
           1.42343711074968357734e+0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) *
                   r +
               1.48103976427480074590e-1) *
                  r +
              6.89767334985100004550e-1) *
                 r +
             1.67638483018380384940e+0) *
                r +
            2.05319162663775882187e+0) *
               r +
           1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) *
                   r +
               2.65321895265761230930e-2) *
                  r +
              2.96560571828504891230e-1) *
                 r +
             1.78482653991729133580e+0) *
                r +
            5.46378491116411436990e+0) *
               r +
           6.65790464350110377720e+0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) *
                   r +
               7.86869131145613259100e-4) *
                  r +
              1.48753612908506148525e-2) *
                 r +
             1.36929880922735805310e-1) *
                r +
            5.99832206555887937690e-1) *
               r +
           1.0);
  }
  return (q < 0.0) ? -val : val;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// One noise stream per (seed, path_index) pair.  Draws are addressed by
/// (step, slot); slot 0..dim_w-1 carry the Brownian increments of a step
/// and further slots carry auxiliary uniforms (bridge test).  Skipping a
/// slot never shifts later draws.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t path_index)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        path_(path_index) {}

  /// Uniform in the open interval (0, 1).
  double uniform(std::uint64_t step, std::uint32_t slot) const {
    const philox::Counter out = philox::block(counter(step, slot >> 1), key_);
    const std::uint32_t half = slot & 1u;
    const std::uint64_t bits =
        (static_cast<std::uint64_t>(out[2 * half]) << 32) | out[2 * half + 1];
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via inverse-CDF (deterministic cross-platform).
  double normal(std::uint64_t step, std::uint32_t slot) const {
    return inverse_normal_cdf(uniform(step, slot));
  }

  std::uint64_t seed() const {
    return static_cast<std::uint64_t>(key_[0]) | (static_cast<std::uint64_t>(key_[1]) << 32);
  }
  std::uint64_t path_index() const { return path_; }

 private:
  philox::Counter counter(std::uint64_t step, std::uint32_t blk) const {
    // 32 bits of block index, 48 of step, 48 of path index.
    return {blk, static_cast<std::uint32_t>(step),
            static_cast<std::uint32_t>((step >> 32) & 0xFFFFu) |
                static_cast<std::uint32_t>((path_ & 0xFFFFu) << 16),
            static_cast<std::uint32_t>(path_ >> 16)};
  }

  philox::Key key_;
  std::uint64_t path_;
};

/// Small splittable generator for test-side sampling (not used by the
/// simulation engine).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : x_(seed) {}
  std::uint64_t next_u64() {
    std::uint64_t z = (x_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  double next_uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }
  /// Uniform on [lo, hi).
  double next_in(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }
  double next_normal() { return inverse_normal_cdf(next_uniform()); }

 private:
  std::uint64_t x_;
};

}  // namespace barrierlab

#endif  // BARRIERLAB_RNG_HPP
