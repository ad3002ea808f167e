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

#ifndef SPARSEWALK_ANALYTICS_HPP_
#define SPARSEWALK_ANALYTICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sparsewalk/env.hpp"
#include "sparsewalk/error.hpp"
#include "sparsewalk/rng.hpp"
#include "sparsewalk/stats.hpp"

namespace sparsewalk {

// ---------------------------------------------------------------------------
// Closed-form speed and block expectations
// ---------------------------------------------------------------------------

enum class ZeroSpeedReason { kNone, kERhoGeOne, kERhoXiInf, kEXi2Inf };

inline const char* zero_speed_reason_name(ZeroSpeedReason r) {
  switch (r) {
    case ZeroSpeedReason::kNone: return "NONE";
    case ZeroSpeedReason::kERhoGeOne: return "E_RHO_GE_1";
    case ZeroSpeedReason::kERhoXiInf: return "E_RHOXI_INF";
    case ZeroSpeedReason::kEXi2Inf: return "E_XI2_INF";
  }
  return "?";
}

struct SpeedReport {
  double v = 0.0;
  double inv_v = 0.0;  // +inf when v = 0
  double e_xi = 0.0, e_xi2 = 0.0, e_rho = 0.0, e_rhoxi = 0.0;
  ZeroSpeedReason degenerate_reason = ZeroSpeedReason::kNone;
};

// v = (1 - E rho) E xi / ((1 - E rho) E xi^2 + 2 E xi E[rho xi]) when
// E rho < 1, E[rho xi] < inf and E xi^2 < inf; v = 0 otherwise with the
// failing condition recorded.
inline SpeedReport speed(const EnvSpec& spec) {
  require(transience_check(spec).transient, ErrorCode::kNotTransient,
          "speed requires a transient spec");
  SpeedReport rep;
  rep.e_xi = xi_moment(spec, 1.0);
  rep.e_xi2 = xi_moment(spec, 2.0);
  rep.e_rho = rho_moment(spec, 1.0);
  rep.e_rhoxi = mixed_moment(spec, 1.0, 1.0);
  if (rep.e_rho >= 1.0) {
    rep.degenerate_reason = ZeroSpeedReason::kERhoGeOne;
  } else if (!std::isfinite(rep.e_rhoxi)) {
    rep.degenerate_reason = ZeroSpeedReason::kERhoXiInf;
  } else if (!std::isfinite(rep.e_xi2)) {
    rep.degenerate_reason = ZeroSpeedReason::kEXi2Inf;
  }
  if (rep.degenerate_reason != ZeroSpeedReason::kNone) {
    rep.v = 0.0;
    rep.inv_v = kInf;
    return rep;
  }
  const double one_minus = 1.0 - rep.e_rho;
  rep.v = one_minus * rep.e_xi / (one_minus * rep.e_xi2 + 2.0 * rep.e_xi * rep.e_rhoxi);
  rep.inv_v = 1.0 / rep.v;
  return rep;
}

// E of the total progeny of the immigrants arriving in the first block:
// (1/2) E xi(xi-1) + E xi E[rho xi] / (1 - E rho); +inf when the moment
// conditions fail.
inline double expected_Y1(const EnvSpec& spec) {
  require(transience_check(spec).transient, ErrorCode::kNotTransient,
          "expected_Y1 requires a transient spec");
  const double e_rho = rho_moment(spec, 1.0);
  const double e_rhoxi = mixed_moment(spec, 1.0, 1.0);
  const double e_xi = xi_moment(spec, 1.0);
  const double e_xi2 = xi_moment(spec, 2.0);
  if (e_rho >= 1.0 || !std::isfinite(e_rhoxi) || !std::isfinite(e_xi2)) {
    return kInf;
  }
  return 0.5 * (e_xi2 - e_xi) + e_xi * e_rhoxi / (1.0 - e_rho);
}

// E T_{S_1} = E xi / v; +inf when v = 0.
inline double expected_first_block_passage(const EnvSpec& spec) {
  const SpeedReport rep = speed(spec);
  if (rep.v == 0.0) return kInf;
  return rep.e_xi / rep.v;
}

// ---------------------------------------------------------------------------
// Perpetuity R = xi_1 + rho_1 xi_2 + rho_1 rho_2 xi_3 + ...
// ---------------------------------------------------------------------------

inline constexpr std::size_t kPerpetuityTermCap = 100000;

namespace detail {

// Almost-sure upper bounds for the bounded families, when they exist.
inline std::optional<double> rho_upper_bound(const LambdaLaw& law) {
  if (const auto* c = std::get_if<LambdaConstant>(&law)) {
    return rho_of_lambda(c->value);
  }
  if (const auto* t = std::get_if<LambdaFiniteTable>(&law)) {
    return rho_of_lambda(t->values.front());  // smallest lambda, largest rho
  }
  return std::nullopt;
}

inline std::optional<double> xi_upper_bound(const XiLaw& law) {
  if (const auto* d = std::get_if<XiDeterministic>(&law)) {
    return static_cast<double>(d->value);
  }
  if (const auto* u = std::get_if<XiUniformInt>(&law)) {
    return static_cast<double>(u->max);
  }
  if (const auto* t = std::get_if<XiFiniteTable>(&law)) {
    return static_cast<double>(t->values.back());
  }
  return std::nullopt;
}

// Exponent minimizing E rho^s over (0, 1]; used for the stochastic remainder
// estimate when rho is unbounded.
inline double remainder_exponent(const EnvSpec& spec) {
  double best_s = 1.0;
  double best = rho_moment(spec, 1.0);
  for (double s = 0.05; s < 1.0; s += 0.05) {
    const double m = rho_moment(spec, s);
    if (m < best) {
      best = m;
      best_s = s;
    }
  }
  return best_s;
}

}  // namespace detail

// One truncated draw of the perpetuity. Truncation stops once the remainder
// estimate drops below eps times the accumulated sum: an exact geometric
// bound for a.s.-bounded (rho, xi) families, a fractional-moment estimate of
// the remaining tail otherwise. The hard cap raises TRUNCATION_CAP.
inline double perpetuity_sample(const EnvSpec& spec, RngStream& rng,
                                double eps = 1e-9) {
  require(rho_log_moment(spec) < 0.0, ErrorCode::kNoRootRegion,
          "perpetuity requires E log rho < 0");
  const auto rho_bound = detail::rho_upper_bound(spec.lambda);
  const auto xi_bound = detail::xi_upper_bound(spec.xi);
  const bool bounded = rho_bound && *rho_bound < 1.0 && xi_bound;

  double frac_s = 1.0, frac_exi = 1.0, frac_geom = 1.0;
  if (!bounded) {
    frac_s = detail::remainder_exponent(spec);
    frac_exi = xi_moment(spec, frac_s);
    const double m = rho_moment(spec, frac_s);
    require(m < 1.0, ErrorCode::kNumericFailure,
            "no contracting fractional moment for the remainder estimate");
    frac_geom = 1.0 / (1.0 - m);
  }

  double sum = 0.0;
  double product = 1.0;  // rho_1 ... rho_{j-1}
  for (std::size_t j = 1; j <= kPerpetuityTermCap; ++j) {
    const BlockDraw draw = draw_block_pair(spec, rng);
    sum += product * static_cast<double>(draw.xi);
    product *= draw.rho;
    if (bounded) {
      // remainder <= product * xi_max / (1 - rho_max), deterministically
      const double remainder = product * *xi_bound / (1.0 - *rho_bound);
      if (remainder <= eps * sum) return sum;
    } else {
      // E[remainder^s | product] <= product^s E xi^s / (1 - E rho^s), s <= 1
      const double est = std::pow(product, frac_s) * frac_exi * frac_geom;
      if (est <= std::pow(eps * sum, frac_s)) return sum;
    }
  }
  raise(ErrorCode::kTruncationCap, "perpetuity truncation cap reached");
}

// ---------------------------------------------------------------------------
// Heavy-tail estimators
// ---------------------------------------------------------------------------

struct TailEstimate {
  double index_hat = 0.0;
  std::size_t k_used = 0;
  double ci_lo = 0.0, ci_hi = 0.0;
  double ci_width = 0.0;
  std::optional<double> prefactor_hat;
  bool degenerate = false;  // zero log-spacings (index reported as +inf)
};

// Hill estimator over the top k order statistics with a bootstrap CI from
// 200 resamples of the tail. k defaults to floor(n^0.6) at the call sites.
inline TailEstimate hill_estimate(std::vector<double> samples, std::size_t k,
                                  RngStream* rng = nullptr) {
  const std::size_t n = samples.size();
  require(k >= 10, ErrorCode::kInvalidParam, "need k >= 10 order statistics");
  require(k < n, ErrorCode::kInvalidParam, "k must be below the sample size");
  for (double x : samples) {
    require(x > 0.0, ErrorCode::kNonpositiveSample,
            "hill estimator requires positive samples");
  }
  std::sort(samples.begin(), samples.end());
  const double log_threshold = std::log(samples[n - k - 1]);
  std::vector<double> spacings;
  spacings.reserve(k);
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double s = std::log(samples[n - 1 - i]) - log_threshold;
    spacings.push_back(s);
    acc += s;
  }
  TailEstimate est;
  est.k_used = k;
  if (acc <= 0.0) {
    est.degenerate = true;
    est.index_hat = kInf;
    return est;
  }
  est.index_hat = static_cast<double>(k) / acc;

  if (rng != nullptr) {
    std::vector<double> boot;
    boot.reserve(200);
    for (int b = 0; b < 200; ++b) {
      double racc = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        racc += spacings[rng->next_u64() % k];
      }
      if (racc > 0.0) boot.push_back(static_cast<double>(k) / racc);
    }
    std::sort(boot.begin(), boot.end());
    est.ci_lo = quantile_sorted(boot, 0.025);
    est.ci_hi = quantile_sorted(boot, 0.975);
    est.ci_width = est.ci_hi - est.ci_lo;
  }
  return est;
}

struct TailConstant {
  double c_hat = 0.0;
  bool non_flat = false;  // plateau slope test failed: alpha looks mismatched
};

// Empirical surrogate for the tail constant: the average of x^alpha S_n(x)
// over the window [q_0.99, q_0.9999], with a flatness check (the regression
// slope of log(x^alpha S(x)) on log x should vanish when alpha matches).
inline TailConstant tail_constant_details(std::vector<double> samples,
                                          double alpha) {
  require(alpha > 0.0, ErrorCode::kInvalidParam, "alpha must be > 0");
  const std::size_t n = samples.size();
  std::sort(samples.begin(), samples.end());
  const double x_lo = quantile_sorted(samples, 0.99);
  const double x_hi = quantile_sorted(samples, 0.9999);
  const std::size_t exceedances =
      samples.end() - std::upper_bound(samples.begin(), samples.end(), x_lo);
  require(exceedances >= 100, ErrorCode::kInsufficientTail,
          "fewer than 100 exceedances over the estimation window");
  require(x_hi > x_lo && x_lo > 0.0, ErrorCode::kInsufficientTail,
          "degenerate estimation window");

  std::vector<double> log_x, log_level;
  double acc = 0.0;
  int points = 0;
  const int grid = 24;
  for (int i = 0; i < grid; ++i) {
    const double x = x_lo * std::pow(x_hi / x_lo, (i + 0.5) / grid);
    const std::size_t above =
        samples.end() - std::upper_bound(samples.begin(), samples.end(), x);
    if (above == 0) continue;
    const double survival = static_cast<double>(above) / static_cast<double>(n);
    const double level = std::pow(x, alpha) * survival;
    acc += level;
    ++points;
    log_x.push_back(std::log(x));
    log_level.push_back(std::log(level));
  }
  require(points >= 4, ErrorCode::kInsufficientTail,
          "too few usable grid points in the window");
  TailConstant out;
  out.c_hat = acc / points;
  const LinearFit fit = least_squares(log_x, log_level);
  out.non_flat = std::fabs(fit.slope) > 0.25;
  return out;
}

inline double tail_constant_estimate(const std::vector<double>& samples,
                                     double alpha) {
  return tail_constant_details(samples, alpha).c_hat;
}

}  // namespace sparsewalk

#endif  // SPARSEWALK_ANALYTICS_HPP_
