// Copyright 2026 the sparsewalk authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPARSEWALK_RNG_HPP_
#define SPARSEWALK_RNG_HPP_

#include <cmath>
#include <cstdint>

namespace sparsewalk {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer; a 64-bit bijection with good avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Deterministic key derivation: replica i of experiment e under master seed s
// gets derive_key(derive_key(s, e), i). Distinct indices give distinct keys.
inline std::uint64_t derive_key(std::uint64_t key, std::uint64_t index) {
  return mix64(key + kGoldenGamma * (index + 1));
}

// Maps signed block indices (environment grows in both directions) to a
// zig-zag code so negative blocks get their own substream family.
inline std::uint64_t zigzag(std::int64_t k) {
  return (static_cast<std::uint64_t>(k) << 1) ^
         static_cast<std::uint64_t>(k >> 63);
}

// Counter-based splittable stream in the SplittableRandom style: the state
// advances by a per-stream odd gamma and the output is mix64 of the state.
// Streams with distinct keys are distinct sequences, and one uniform draw
// consumes exactly one 64-bit output.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key)
      : state_(mix64(key + kGoldenGamma)),
        gamma_(mix64(key + 2 * kGoldenGamma) | 1ull) {}

  std::uint64_t next_u64() {
    state_ += gamma_;
    return mix64(state_);
  }

  // Uniform on [0, 1), 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1); safe to pass through log().
  double next_open01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return next_double() < p; }

 private:
  std::uint64_t state_;
  std::uint64_t gamma_;
};

// ---------------------------------------------------------------------------
// Distributions. All samplers are exact in law; the equality-in-law tests in
// the branching module depend on that.
// ---------------------------------------------------------------------------

inline double sample_exponential(RngStream& rng) {
  return -std::log(rng.next_open01());
}

// Box-Muller, one value per call (two uniforms).
inline double sample_standard_normal(RngStream& rng) {
  const double u1 = rng.next_open01();
  const double u2 = rng.next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

// Marsaglia-Tsang for shape >= 1; the usual shape+1 boost below 1.
inline double sample_gamma(RngStream& rng, double shape) {
  if (shape < 1.0) {
    const double g = sample_gamma(rng, shape + 1.0);
    return g * std::pow(rng.next_open01(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = sample_standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.next_open01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

namespace detail {

inline std::uint64_t poisson_knuth(RngStream& rng, double mean) {
  const double limit = std::exp(-mean);
  std::uint64_t k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.next_double();
  } while (p > limit);
  return k - 1;
}

// Hoermann's PTRS transformed rejection, exact for mean >= 10.
inline std::uint64_t poisson_ptrs(RngStream& rng, double mean) {
  const double log_mean = std::log(mean);
  const double b = 0.931 + 2.53 * std::sqrt(mean);
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.next_double() - 0.5;
    const double v = rng.next_double();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        kf * log_mean - mean - std::lgamma(kf + 1.0)) {
      return static_cast<std::uint64_t>(kf);
    }
  }
}

}  // namespace detail

inline std::uint64_t sample_poisson(RngStream& rng, double mean) {
  if (mean <= 0.0) return 0;
  if (mean < 10.0) return detail::poisson_knuth(rng, mean);
  return detail::poisson_ptrs(rng, mean);
}

// Geometric on {0,1,...} with success probability p: number of failures
// before the first success. One uniform per draw.
inline std::uint64_t sample_geometric(RngStream& rng, double p) {
  if (p >= 1.0) return 0;
  const double u = rng.next_open01();
  const double g = std::floor(std::log(u) / std::log1p(-p));
  return static_cast<std::uint64_t>(g);
}

// NegativeBinomial(r, p): sum of r iid Geom(p). Small r is summed directly,
// large r goes through the gamma-Poisson mixture (still exact in law). The
// two routes are checked against each other in distribution by the tests.
inline constexpr std::uint64_t kNegBinDirectLimit = 64;

inline std::uint64_t sample_negative_binomial(RngStream& rng, std::uint64_t r,
                                              double p) {
  if (r == 0) return 0;
  if (r <= kNegBinDirectLimit) {
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < r; ++i) total += sample_geometric(rng, p);
    return total;
  }
  const double scale = (1.0 - p) / p;
  return sample_poisson(rng, sample_gamma(rng, static_cast<double>(r)) * scale);
}

inline double sample_beta(RngStream& rng, double a, double b) {
  const double x = sample_gamma(rng, a);
  const double y = sample_gamma(rng, b);
  return x / (x + y);
}

}  // namespace sparsewalk

#endif  // SPARSEWALK_RNG_HPP_
