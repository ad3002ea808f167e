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

#ifndef SPARSEWALK_CRITGW_HPP_
#define SPARSEWALK_CRITGW_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "sparsewalk/analytics.hpp"
#include "sparsewalk/env.hpp"
#include "sparsewalk/error.hpp"
#include "sparsewalk/rng.hpp"

namespace sparsewalk {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

// ---------------------------------------------------------------------------
// Critical Galton-Watson segment with unit immigration, Geom(1/2) offspring
// ---------------------------------------------------------------------------

struct CritMoments {
  std::uint64_t n = 1;
  double mean_z = 1.0;  // E Z(1,n)
  double var_z = 0.0;   // Var Z(1,n) = 2n
  double mean_y = 0.0;  // E Y(1,n) = n
  double var_y = 0.0;   // Var Y(1,n) = n(n+1)(2n+1)/3
  double mean_w = 0.0;  // E W_n = n(n+1)/2
};

inline CritMoments crit_moments(std::uint64_t n) {
  require(n >= 1, ErrorCode::kInvalidParam, "generation must be >= 1");
  CritMoments m;
  m.n = n;
  const double nd = static_cast<double>(n);
  m.mean_z = 1.0;
  m.var_z = 2.0 * nd;
  m.mean_y = nd;
  m.var_y = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 3.0;
  m.mean_w = nd * (nd + 1.0) / 2.0;
  return m;
}

// W_n = Z_1 + ... + Z_n of the critical process with one immigrant per
// generation and omega = 1/2 throughout.
inline std::uint64_t simulate_w_crit(std::uint64_t n, RngStream& rng) {
  std::uint64_t z = 0;
  std::uint64_t total = 0;
  for (std::uint64_t g = 0; g < n; ++g) {
    z = sample_negative_binomial(rng, z + 1, 0.5);
    total += z;
  }
  return total;
}

// Single-immigrant lineage: Z(1,k) and Y(1,n) of one immigrant's progeny
// (the immigrant reproduces, her offspring form generation 1).
struct CritLineage {
  std::uint64_t z_n = 0;  // Z(1, n)
  std::uint64_t y_n = 0;  // Y(1, n) = sum of generations 1..n
};

inline CritLineage simulate_crit_lineage(std::uint64_t n, RngStream& rng) {
  CritLineage out;
  std::uint64_t z = 1;  // the immigrant herself, not counted
  for (std::uint64_t g = 0; g < n; ++g) {
    z = z == 0 ? 0 : sample_negative_binomial(rng, z, 0.5);
    out.y_n += z;
  }
  out.z_n = z;
  return out;
}

// a_j(x) = E exp(x Y(1,j)) by the recursion a_j = 1/(2 - e^x a_{j-1}),
// a_0 = 1. Returns +inf from the first nonpositive denominator on.
inline double lt_recursion(double x, int j) {
  require(x >= 0.0, ErrorCode::kInvalidParam, "x must be >= 0");
  require(j >= 0, ErrorCode::kInvalidParam, "generation must be >= 0");
  const double ex = std::exp(x);
  double a = 1.0;
  for (int i = 0; i < j; ++i) {
    const double denom = 2.0 - ex * a;
    if (denom <= 0.0) return kInf;
    a = 1.0 / denom;
  }
  return a;
}

// Smallest K > 1 with K - K^2 gamma > 1, i.e. just above the lower root of
// gamma K^2 - K + 1 = 0; found by bisection.
inline double b_bound_constant(double gamma) {
  require(gamma > 0.0 && gamma < 0.25, ErrorCode::kPreconditionViolated,
          "gamma must lie in (0, 1/4)");
  double lo = 1.0, hi = 0.5 / gamma;  // f(K) = K - K^2 gamma - 1; f(hi) > 0
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid - mid * mid * gamma > 1.0) hi = mid;
    else lo = mid;
  }
  return hi;
}

// Checks e^x a_j(x) <= 1 + K x (j+1) for the computed recursion value.
// Requires j(1+j) x <= gamma. x0 is advisory: the bound is only guaranteed
// for x < x0(gamma), so a false result for larger x contradicts nothing.
inline bool b_bound_check(double x, int j, double gamma, double x0 = 1e-3) {
  require(gamma > 0.0 && gamma < 0.25, ErrorCode::kPreconditionViolated,
          "gamma must lie in (0, 1/4)");
  require(j >= 0 && x >= 0.0, ErrorCode::kPreconditionViolated,
          "need j >= 0 and x >= 0");
  const double jd = static_cast<double>(j);
  require(jd * (1.0 + jd) * x <= gamma, ErrorCode::kPreconditionViolated,
          "j(1+j)x must not exceed gamma");
  (void)x0;
  const double k = b_bound_constant(gamma);
  const double a = lt_recursion(x, j);
  if (std::isinf(a)) return false;
  return std::exp(x) * a <= 1.0 + k * x * (jd + 1.0);
}

// ---------------------------------------------------------------------------
// Moments of the limit variable theta with E e^{-s theta} = 1/cosh(sqrt(s))
// ---------------------------------------------------------------------------

namespace detail {

// Euler numbers E_0, E_2, E_4, ... via sum_{k=0}^{n} C(2n, 2k) E_{2k} = 0.
inline const std::vector<BigInt>& euler_numbers(std::size_t count) {
  static std::vector<BigInt> cache{BigInt(1)};
  while (cache.size() < count) {
    const std::size_t n = cache.size();
    BigInt acc = 0;
    for (std::size_t k = 0; k < n; ++k) {
      // C(2n, 2k)
      BigInt binom = 1;
      for (std::size_t i = 0; i < 2 * k; ++i) {
        binom *= BigInt(2 * n - i);
        binom /= BigInt(i + 1);
      }
      acc += binom * cache[k];
    }
    cache.push_back(-acc);
  }
  return cache;
}

}  // namespace detail

// E theta^k = (-1)^k k! E_{2k} / (2k)!, exact.
inline BigRational theta_moment_exact(unsigned k) {
  require(k >= 1, ErrorCode::kInvalidParam, "moment order must be >= 1");
  const auto& euler = detail::euler_numbers(k + 1);
  BigInt num = euler[k];
  if (k % 2 == 1) num = -num;
  BigInt kfact = 1;
  for (unsigned i = 2; i <= k; ++i) kfact *= i;
  BigInt twokfact = 1;
  for (unsigned i = 2; i <= 2 * k; ++i) twokfact *= i;
  return BigRational(num * kfact, twokfact);
}

inline double theta_moment(unsigned k) {
  return static_cast<double>(theta_moment_exact(k));
}

inline double theta_lt(double s) {
  require(s >= 0.0, ErrorCode::kInvalidParam, "s must be >= 0");
  return 1.0 / std::cosh(std::sqrt(s));
}

// ---------------------------------------------------------------------------
// Tail of W_varsigma for a heavy-tailed independent horizon varsigma
// ---------------------------------------------------------------------------

struct WTailProbe {
  TailEstimate hill;
  double prefactor_hat = 0.0;   // empirical x^alpha P{W > x} plateau
  double prefactor_exact = 0.0; // E theta^alpha * c_varsigma (const ell only)
};

// Monte Carlo probe of P{W_varsigma > x} ~ E theta^alpha P{varsigma > x^(1/2)}
// for a varsigma law with regularly varying tail of index 2 alpha.
inline WTailProbe tail_of_w_varsigma(const XiLaw& varsigma, double alpha,
                                     std::size_t samples, RngStream& rng) {
  std::vector<double> w;
  w.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const std::uint64_t horizon = sample_xi(varsigma, rng);
    w.push_back(static_cast<double>(simulate_w_crit(horizon, rng)) + 1e-9);
  }
  WTailProbe probe;
  const auto k = static_cast<std::size_t>(std::pow(static_cast<double>(samples), 0.6));
  probe.hill = hill_estimate(w, k, &rng);
  probe.prefactor_hat = tail_constant_estimate(w, alpha);
  if (const auto* p = std::get_if<XiDiscretePareto>(&varsigma)) {
    if (p->ell == SlowFactor::kConstant) {
      // P{W > x} ~ E theta^alpha * c x^{-alpha} when P{s > t} = c t^{-2 alpha}
      const double k_order = std::max(1.0, std::round(alpha));
      const double theta_a = std::fabs(k_order - alpha) < 1e-9
                                 ? theta_moment(static_cast<unsigned>(k_order))
                                 : 0.0;
      probe.prefactor_exact = theta_a * p->c;
    }
  }
  return probe;
}

}  // namespace sparsewalk

#endif  // SPARSEWALK_CRITGW_HPP_
