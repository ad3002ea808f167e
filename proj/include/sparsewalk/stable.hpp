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

#ifndef SPARSEWALK_STABLE_HPP_
#define SPARSEWALK_STABLE_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "sparsewalk/env.hpp"
#include "sparsewalk/error.hpp"
#include "sparsewalk/rng.hpp"

namespace sparsewalk {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

struct StableSpec {
  double alpha = 1.0;  // in (0, 2]
};

// ---------------------------------------------------------------------------
// Exact transforms in the working parametrization:
//   alpha in (0,1):  -log E exp(-u S) = Gamma(1-alpha) u^alpha, u >= 0
//   alpha = 1:        log E exp(iu S) = -(pi/2)|u| - iu log|u|
//   alpha in (1,2):   log E exp(iu S) = |u|^a Gamma(2-a)/(a-1) (cos(pi a/2)
//                                        - i sin(pi a/2) sign u)
//   alpha = 2:        standard normal
// ---------------------------------------------------------------------------

inline double stable_lt(const StableSpec& spec, double u) {
  require(spec.alpha > 0.0 && spec.alpha < 1.0, ErrorCode::kUnsupportedCase,
          "the Laplace transform is defined for alpha < 1");
  require(u >= 0.0, ErrorCode::kInvalidParam, "u must be >= 0");
  return std::exp(-std::tgamma(1.0 - spec.alpha) * std::pow(u, spec.alpha));
}

inline std::complex<double> stable_cf(const StableSpec& spec, double u) {
  const double a = spec.alpha;
  require(a >= 1.0 && a <= 2.0, ErrorCode::kUnsupportedCase,
          "the characteristic function form covers alpha in [1,2]");
  if (u == 0.0) return {1.0, 0.0};
  if (a == 2.0) return {std::exp(-0.5 * u * u), 0.0};
  const double au = std::fabs(u);
  if (a == 1.0) {
    const std::complex<double> log_cf(-0.5 * kPi * au, -u * std::log(au));
    return std::exp(log_cf);
  }
  const double scale = std::tgamma(2.0 - a) / (a - 1.0) * std::pow(au, a);
  const double sgn = u > 0.0 ? 1.0 : -1.0;
  const std::complex<double> log_cf(scale * std::cos(0.5 * kPi * a),
                                    -scale * std::sin(0.5 * kPi * a) * sgn);
  return std::exp(log_cf);
}

// ---------------------------------------------------------------------------
// Sampling: Chambers-Mallows-Stuck for the totally skewed standard laws,
// composed with the scale/shift map into the working parametrization. The
// map is locked by the sampler-transform agreement tests.
// ---------------------------------------------------------------------------

namespace detail {

// S_alpha(1, 1, 0) in the S1 parametrization, alpha != 1 (Weron's form).
inline double cms_skewed_standard(double alpha, RngStream& rng) {
  const double v = kPi * (rng.next_open01() - 0.5);
  const double w = sample_exponential(rng);
  const double t = std::tan(0.5 * kPi * alpha);
  const double b = std::atan(t) / alpha;
  const double s = std::pow(1.0 + t * t, 0.5 / alpha);
  return s * std::sin(alpha * (v + b)) / std::pow(std::cos(v), 1.0 / alpha) *
         std::pow(std::cos(v - alpha * (v + b)) / w, (1.0 - alpha) / alpha);
}

// S_1(1, 1, 0) in the S1 parametrization.
inline double cms_skewed_alpha1(RngStream& rng) {
  const double v = kPi * (rng.next_open01() - 0.5);
  const double w = sample_exponential(rng);
  const double half_pi = 0.5 * kPi;
  return (2.0 / kPi) * ((half_pi + v) * std::tan(v) -
                        std::log((half_pi * w * std::cos(v)) / (half_pi + v)));
}

}  // namespace detail

inline double stable_sample(const StableSpec& spec, RngStream& rng) {
  const double a = spec.alpha;
  require(a > 0.0 && a <= 2.0, ErrorCode::kInvalidParam,
          "alpha must lie in (0, 2]");
  if (a == 2.0) return sample_standard_normal(rng);
  if (a == 1.0) {
    // scale pi/2 shifts the log term; the additive constant restores it
    return 0.5 * kPi * detail::cms_skewed_alpha1(rng) + std::log(0.5 * kPi);
  }
  if (a < 1.0) {
    // positive stable: E exp(-uX) = exp(-sigma^a sec(pi a/2) u^a) for the
    // CMS standard draw scaled by sigma
    const double sigma =
        std::pow(std::tgamma(1.0 - a) * std::cos(0.5 * kPi * a), 1.0 / a);
    return sigma * detail::cms_skewed_standard(a, rng);
  }
  // alpha in (1, 2): sigma^a = Gamma(2-a) |cos(pi a/2)| / (a-1)
  const double sigma = std::pow(
      std::tgamma(2.0 - a) * std::fabs(std::cos(0.5 * kPi * a)) / (a - 1.0),
      1.0 / a);
  return sigma * detail::cms_skewed_standard(a, rng);
}

// The Mittag-Leffler law of parameter alpha is the law of S_alpha^{-alpha}.
inline double mittag_leffler_sample(double alpha, RngStream& rng) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidParam,
          "Mittag-Leffler parameter must lie in (0,1)");
  return std::pow(stable_sample(StableSpec{alpha}, rng), -alpha);
}

// ---------------------------------------------------------------------------
// Norming / centering plans
// ---------------------------------------------------------------------------

// Monotone table with linear interpolation in log-t and boundary-slope
// extrapolation; backs the slowly varying functions the paper defines only
// implicitly.
struct MonotoneTable {
  std::vector<double> log_t;
  std::vector<double> value;

  bool empty() const { return log_t.empty(); }

  double at(double t) const {
    const double lt = std::log(t);
    if (log_t.empty()) return 0.0;
    if (log_t.size() == 1) return value.front();
    std::size_t hi = std::lower_bound(log_t.begin(), log_t.end(), lt) - log_t.begin();
    if (hi == 0) hi = 1;
    if (hi >= log_t.size()) hi = log_t.size() - 1;
    const std::size_t lo = hi - 1;
    const double w = (lt - log_t[lo]) / (log_t[hi] - log_t[lo]);
    return value[lo] + w * (value[hi] - value[lo]);
  }
};

enum class NormingFamily { kA, kB };

struct NormingEstimates {
  std::optional<double> mu;      // E tau_1
  std::optional<double> e_xi;    // E xi
  std::optional<double> e_barw;  // E W-bar over a cycle (alpha > 1 only)
  std::optional<double> c_hat;   // tail constant of W-bar (A family)
  std::vector<double> barw_samples;  // raw cycle sums (B family, alpha = 1)
};

struct NormingPlan {
  NormingFamily family = NormingFamily::kA;
  double alpha = 0.0;
  double mu = 0.0;
  double e_xi = 0.0;
  double e_barw = 0.0;   // 0 when not applicable
  double c_hat = 0.0;    // 0 for the B family
  double a_coeff = 0.0;  // linear centering coefficient A_alpha
  MonotoneTable c_alpha;  // t -> c_alpha(t) with t P{W > c_alpha(t)} = 1
  MonotoneTable r2;       // t -> r_2(t) truncated-second-moment norming
  MonotoneTable m_tail;   // y -> integral_0^y P{W > x} dx

  // Centering a(n) and norming b(n) for the T_n statistic.
  double a_at(double n) const {
    const double t = n / (mu * e_xi);
    if (alpha < 1.0) return 0.0;
    if (alpha == 1.0) {
      const double cut = family == NormingFamily::kA ? c_hat * t : c_alpha.at(t);
      const double base = family == NormingFamily::kA ? 0.0 : n;
      return base + 2.0 * t * m_tail.at(cut);
    }
    return a_coeff * n;
  }

  double b_at(double n) const {
    const double t = n / (mu * e_xi);
    if (alpha == 2.0) {
      // Truncated-second-moment norming solved on the empirical cycle law;
      // (C t log t)^{1/2} is its asymptotic form but the implicit constant
      // drifts like log(C t log t)/log t at finite t.
      return r2.at(t);
    }
    if (family == NormingFamily::kA) {
      if (alpha == 1.0) return c_hat * t;
      return std::pow(c_hat * t, 1.0 / alpha);
    }
    return c_alpha.at(n) * std::pow(mu * e_xi, -1.0 / alpha);
  }
};

namespace detail {

inline MonotoneTable build_quantile_table(const std::vector<double>& sorted,
                                          double t_lo, double t_hi, int points) {
  MonotoneTable table;
  const double n = static_cast<double>(sorted.size());
  for (int i = 0; i < points; ++i) {
    const double t = t_lo * std::pow(t_hi / t_lo, static_cast<double>(i) / (points - 1));
    const double rank = std::min(n - 1.0, std::max(0.0, (1.0 - 1.0 / t) * (n - 1.0)));
    const auto idx = static_cast<std::size_t>(rank);
    table.log_t.push_back(std::log(t));
    table.value.push_back(sorted[idx]);
  }
  return table;
}

inline MonotoneTable build_m_tail_table(const std::vector<double>& sorted) {
  // m(y) = E min(X, y) computed on a log grid of y over the sample range
  MonotoneTable table;
  const double y_lo = std::max(1.0, sorted.front() + 1.0);
  const double y_hi = sorted.back();
  const int points = 64;
  const double n = static_cast<double>(sorted.size());
  std::vector<double> prefix(sorted.size() + 1, 0.0);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    prefix[i + 1] = prefix[i] + sorted[i];
  }
  for (int i = 0; i < points; ++i) {
    const double y = y_lo * std::pow(y_hi / y_lo, static_cast<double>(i) / (points - 1));
    const std::size_t below =
        std::upper_bound(sorted.begin(), sorted.end(), y) - sorted.begin();
    const double m = (prefix[below] + y * (n - static_cast<double>(below))) / n;
    table.log_t.push_back(std::log(y));
    table.value.push_back(m);
  }
  return table;
}

inline MonotoneTable build_r2_table(const std::vector<double>& sorted,
                                    double t_lo, double t_hi, int points) {
  // r_2(t) solves t * E[X^2 1{X <= r}] / r^2 = 1, nondecreasing in t.
  const double n = static_cast<double>(sorted.size());
  std::vector<double> sq_prefix(sorted.size() + 1, 0.0);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    sq_prefix[i + 1] = sq_prefix[i] + sorted[i] * sorted[i];
  }
  const auto truncated_m2 = [&](double r) {
    const std::size_t below =
        std::upper_bound(sorted.begin(), sorted.end(), r) - sorted.begin();
    return sq_prefix[below] / n;
  };
  MonotoneTable table;
  for (int i = 0; i < points; ++i) {
    const double t = t_lo * std::pow(t_hi / t_lo, static_cast<double>(i) / (points - 1));
    double lo = 1e-9, hi = sorted.back() * std::sqrt(t) + 1.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (t * truncated_m2(mid) / (mid * mid) > 1.0) lo = mid;
      else hi = mid;
    }
    table.log_t.push_back(std::log(t));
    table.value.push_back(hi);
  }
  return table;
}

}  // namespace detail

// Builds the concrete centering/norming plan for a classified regime from
// regeneration-cycle estimates. A-family cases consume the scalar tail
// constant; B-family cases build the slowly varying functions as monotone
// tables from the raw cycle samples.
inline NormingPlan build_norming_plan(const RegimeReport& report,
                                      const NormingEstimates& est) {
  NormingPlan plan;
  switch (report.case_label) {
    case RegimeCase::kA1:
    case RegimeCase::kA2:
    case RegimeCase::kA3:
      plan.family = NormingFamily::kA;
      break;
    case RegimeCase::kB1:
    case RegimeCase::kB2:
      plan.family = NormingFamily::kB;
      break;
    default:
      raise(ErrorCode::kUnsupportedCase,
            "norming plans cover the A and B families only");
  }
  plan.alpha = report.effective_alpha();
  require(est.mu.has_value() && est.e_xi.has_value(), ErrorCode::kMissingEstimate,
          "mu and E xi estimates are required");
  plan.mu = *est.mu;
  plan.e_xi = *est.e_xi;

  if (plan.alpha > 1.0) {
    require(est.e_barw.has_value(), ErrorCode::kMissingEstimate,
            "E W-bar estimate required for alpha > 1");
    plan.e_barw = *est.e_barw;
    plan.a_coeff = 1.0 + 2.0 * plan.e_barw / (plan.mu * plan.e_xi);
  }

  if (plan.family == NormingFamily::kA) {
    require(est.c_hat.has_value(), ErrorCode::kMissingEstimate,
            "tail constant estimate required for the A family");
    plan.c_hat = *est.c_hat;
  }

  const bool need_samples = plan.family == NormingFamily::kB ||
                            plan.alpha == 1.0 || plan.alpha == 2.0;
  if (need_samples) {
    require(est.barw_samples.size() >= 1000, ErrorCode::kMissingEstimate,
            "cycle samples required for table-backed norming functions");
    std::vector<double> sorted = est.barw_samples;
    std::sort(sorted.begin(), sorted.end());
    const double t_hi = static_cast<double>(sorted.size()) / 10.0;
    if (plan.family == NormingFamily::kB && plan.alpha < 2.0) {
      plan.c_alpha = detail::build_quantile_table(sorted, 50.0, t_hi, 48);
    }
    if (plan.alpha == 2.0) {
      plan.r2 = detail::build_r2_table(sorted, 50.0, t_hi, 48);
    }
    if (plan.alpha == 1.0) {
      plan.m_tail = detail::build_m_tail_table(sorted);
    }
  }
  return plan;
}

}  // namespace sparsewalk

#endif  // SPARSEWALK_STABLE_HPP_
