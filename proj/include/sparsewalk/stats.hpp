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

#ifndef SPARSEWALK_STATS_HPP_
#define SPARSEWALK_STATS_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "sparsewalk/error.hpp"
#include "sparsewalk/rng.hpp"

namespace sparsewalk {

// Survival function of the Kolmogorov distribution,
// Q(x) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 x^2).
inline double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  if (x >= 10.0) return 0.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * x * x);
    sum += sign * term;
    if (term < 1e-18) break;
    sign = -sign;
  }
  return std::min(1.0, std::max(0.0, 2.0 * sum));
}

struct KsResult {
  double statistic = 0.0;
  double pvalue = 1.0;
};

// Sup-distance between the empirical CDFs (tie-aware merge walk).
inline double ks_statistic_sorted(std::span<const double> a,
                                  std::span<const double> b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na -
                              static_cast<double>(j) / nb));
  }
  return d;
}

// Two-sample KS with p-value from the asymptotic Kolmogorov distribution,
// effective size |a||b|/(|a|+|b|).
inline KsResult two_sample_ks(std::vector<double> a, std::vector<double> b) {
  require(a.size() >= 25 && b.size() >= 25, ErrorCode::kTooFewSamples,
          "two_sample_ks needs at least 25 samples per side");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  KsResult out;
  out.statistic = ks_statistic_sorted(a, b);
  const double ne = static_cast<double>(a.size()) * static_cast<double>(b.size()) /
                    static_cast<double>(a.size() + b.size());
  out.pvalue = kolmogorov_sf(std::sqrt(ne) * out.statistic);
  return out;
}

enum class TransformKind { kLaplace, kCharacteristic };

struct TransformPoint {
  double at = 0.0;       // s (Laplace) or u (characteristic)
  double value_re = 0.0;
  double value_im = 0.0;  // zero for Laplace
  double se = 0.0;        // combined standard error of the point estimate
};

// Sample means of exp(-s X) or exp(i u X) with a standard error per point.
inline std::vector<TransformPoint> empirical_transform(
    std::span<const double> samples, std::span<const double> grid,
    TransformKind kind) {
  std::vector<TransformPoint> out;
  out.reserve(grid.size());
  const double n = static_cast<double>(samples.size());
  for (double t : grid) {
    TransformPoint pt;
    pt.at = t;
    if (kind == TransformKind::kLaplace) {
      double sum = 0.0, sumsq = 0.0;
      for (double x : samples) {
        const double v = std::exp(-t * x);
        sum += v;
        sumsq += v * v;
      }
      pt.value_re = sum / n;
      pt.se = std::sqrt(std::max(0.0, sumsq / n - pt.value_re * pt.value_re) / n);
    } else {
      double sum_c = 0.0, sum_s = 0.0, sumsq_c = 0.0, sumsq_s = 0.0;
      for (double x : samples) {
        const double c = std::cos(t * x);
        const double s = std::sin(t * x);
        sum_c += c;
        sum_s += s;
        sumsq_c += c * c;
        sumsq_s += s * s;
      }
      pt.value_re = sum_c / n;
      pt.value_im = sum_s / n;
      const double var_c = std::max(0.0, sumsq_c / n - pt.value_re * pt.value_re);
      const double var_s = std::max(0.0, sumsq_s / n - pt.value_im * pt.value_im);
      pt.se = std::sqrt((var_c + var_s) / n);
    }
    out.push_back(pt);
  }
  return out;
}

inline double sample_mean(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double sample_variance(std::span<const double> x) {
  const double m = sample_mean(x);
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return acc / static_cast<double>(x.size() - 1);
}

inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

struct QQTable {
  std::vector<double> probs;
  std::vector<double> sample_q;
  std::vector<double> reference_q;
};

inline QQTable make_qq(std::vector<double> sample, std::vector<double> reference,
                       int points = 19) {
  std::sort(sample.begin(), sample.end());
  std::sort(reference.begin(), reference.end());
  QQTable qq;
  for (int i = 1; i <= points; ++i) {
    const double p = static_cast<double>(i) / (points + 1);
    qq.probs.push_back(p);
    qq.sample_q.push_back(quantile_sorted(sample, p));
    qq.reference_q.push_back(quantile_sorted(reference, p));
  }
  return qq;
}

// Bootstrap standard error of the mean (resampling with replacement).
inline double bootstrap_se_mean(std::span<const double> x, int resamples,
                                RngStream& rng) {
  const std::size_t n = x.size();
  std::vector<double> means;
  means.reserve(resamples);
  for (int r = 0; r < resamples; ++r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += x[rng.next_u64() % n];
    }
    means.push_back(acc / static_cast<double>(n));
  }
  const double m = sample_mean(means);
  double var = 0.0;
  for (double v : means) var += (v - m) * (v - m);
  return std::sqrt(var / static_cast<double>(resamples - 1));
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline LinearFit least_squares(std::span<const double> x,
                               std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = sample_mean(x);
  const double my = sample_mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = (syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
  (void)n;
  return fit;
}

// Two-sided Mann-Kendall trend test p-value (normal approximation with the
// exact small-sample variance, no tie correction needed for our inputs).
inline double mann_kendall_pvalue(std::span<const double> y) {
  const std::size_t n = y.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (y[j] > y[i]) s += 1.0;
      else if (y[j] < y[i]) s -= 1.0;
    }
  }
  const double var = static_cast<double>(n) * (n - 1) * (2.0 * n + 5) / 18.0;
  double z = 0.0;
  if (s > 0) z = (s - 1.0) / std::sqrt(var);
  else if (s < 0) z = (s + 1.0) / std::sqrt(var);
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

}  // namespace sparsewalk

#endif  // SPARSEWALK_STATS_HPP_
