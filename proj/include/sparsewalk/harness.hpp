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

#ifndef SPARSEWALK_HARNESS_HPP_
#define SPARSEWALK_HARNESS_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sparsewalk/analytics.hpp"
#include "sparsewalk/branching.hpp"
#include "sparsewalk/critgw.hpp"
#include "sparsewalk/env.hpp"
#include "sparsewalk/env_io.hpp"
#include "sparsewalk/error.hpp"
#include "sparsewalk/parallel.hpp"
#include "sparsewalk/stable.hpp"
#include "sparsewalk/stats.hpp"
#include "sparsewalk/walk.hpp"

namespace sparsewalk {

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

enum class ExperimentKind {
  kSpeed,
  kIdentity31,
  kRegenTail,
  kLimitT,
  kLimitX,
  kCritGw,
  kPerpetuity,
};

inline const char* experiment_kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kSpeed: return "SPEED";
    case ExperimentKind::kIdentity31: return "IDENTITY_31";
    case ExperimentKind::kRegenTail: return "REGEN_TAIL";
    case ExperimentKind::kLimitT: return "LIMIT_T";
    case ExperimentKind::kLimitX: return "LIMIT_X";
    case ExperimentKind::kCritGw: return "CRITGW";
    case ExperimentKind::kPerpetuity: return "PERPETUITY";
  }
  return "?";
}

inline ExperimentKind experiment_kind_from_name(const std::string& name) {
  if (name == "SPEED") return ExperimentKind::kSpeed;
  if (name == "IDENTITY_31") return ExperimentKind::kIdentity31;
  if (name == "REGEN_TAIL") return ExperimentKind::kRegenTail;
  if (name == "LIMIT_T") return ExperimentKind::kLimitT;
  if (name == "LIMIT_X") return ExperimentKind::kLimitX;
  if (name == "CRITGW") return ExperimentKind::kCritGw;
  if (name == "PERPETUITY") return ExperimentKind::kPerpetuity;
  raise(ErrorCode::kInvalidParam, "unknown experiment kind '" + name + "'");
}

// Default tolerances, pinned here once. The alpha = 1 limit check is relaxed
// because its centering is built from the empirical integrated tail.
struct Tolerances {
  static constexpr double kLimitKs = 0.08;
  static constexpr double kLimitKsAlpha1 = 0.12;
  static constexpr double kIdentityPValue = 0.01;
  static constexpr double kIdentityPassFraction = 0.95;
  static constexpr double kSpeedSigmas = 3.0;
  static constexpr double kHillAlpha1 = 0.15;
  static constexpr double kHillAlpha15 = 0.2;
  static constexpr double kPerpetuityHill = 0.15;
  static constexpr double kTauTailR2 = 0.95;
};

struct ExperimentConfig {
  std::optional<EnvSpec> spec;
  ExperimentKind kind = ExperimentKind::kSpeed;
  std::uint64_t n = 100000;       // sites, steps or generations by kind
  std::uint64_t replicas = 200;   // replicas / draws / samples by kind
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::uint64_t cycles = 1000000;      // regeneration prerun size
  std::uint64_t n_blocks = 5;          // identity check block count
  std::uint64_t n_blocks_walk = 0;     // 0 = n_blocks
  std::uint64_t n_blocks_bpi = 0;      // 0 = n_blocks
  std::uint64_t seeds = 1;             // identity check repeats
  std::string critgw_check = "moments";
  double alpha = 0.0;                  // tail index override where applicable
  double tolerance = 0.0;              // 0 = kind default
  double eps = 1e-9;                   // perpetuity truncation tolerance
  std::uint64_t step_budget = kDefaultStepBudget;
  std::string out_path;
  std::string raw_path;
};

inline ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.kind = experiment_kind_from_name(detail::field(j, "kind").get<std::string>());
  if (j.contains("spec")) cfg.spec = build_env_spec(j.at("spec"));
  if (j.contains("n")) cfg.n = j.at("n").get<std::uint64_t>();
  if (j.contains("replicas")) cfg.replicas = j.at("replicas").get<std::uint64_t>();
  require(j.contains("seed"), ErrorCode::kInvalidParam, "config must pin a seed");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("workers")) cfg.workers = j.at("workers").get<unsigned>();
  if (j.contains("cycles")) cfg.cycles = j.at("cycles").get<std::uint64_t>();
  if (j.contains("n_blocks")) cfg.n_blocks = j.at("n_blocks").get<std::uint64_t>();
  if (j.contains("n_blocks_walk")) cfg.n_blocks_walk = j.at("n_blocks_walk").get<std::uint64_t>();
  if (j.contains("n_blocks_bpi")) cfg.n_blocks_bpi = j.at("n_blocks_bpi").get<std::uint64_t>();
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::uint64_t>();
  if (j.contains("critgw_check")) cfg.critgw_check = j.at("critgw_check").get<std::string>();
  if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
  if (j.contains("tolerance")) cfg.tolerance = j.at("tolerance").get<double>();
  if (j.contains("eps")) cfg.eps = j.at("eps").get<double>();
  if (j.contains("step_budget")) cfg.step_budget = j.at("step_budget").get<std::uint64_t>();
  if (j.contains("out")) cfg.out_path = j.at("out").get<std::string>();
  if (j.contains("raw")) cfg.raw_path = j.at("raw").get<std::string>();
  require(cfg.replicas >= 1, ErrorCode::kInvalidParam, "replicas must be >= 1");
  return cfg;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct StatReport {
  std::string kind;
  bool pass = false;
  double tolerance = 0.0;
  std::optional<KsResult> ks;
  std::optional<TailEstimate> hill;
  std::vector<TransformPoint> transform;
  QQTable qq;
  std::uint64_t replicas = 0;
  std::uint64_t truncation_count = 0;
  json details = json::object();
  // Excluded from determinism comparisons:
  double runtime_seconds = 0.0;
  unsigned workers = 1;
};

inline json report_to_json(const StatReport& rep) {
  json j;
  j["kind"] = rep.kind;
  j["pass"] = rep.pass;
  j["tolerance"] = rep.tolerance;
  if (rep.ks) {
    j["ks"] = json{{"statistic", rep.ks->statistic}, {"pvalue", rep.ks->pvalue}};
  } else {
    j["ks"] = nullptr;
  }
  if (rep.hill) {
    j["hill"] = json{{"index_hat", rep.hill->index_hat},
                     {"k_used", rep.hill->k_used},
                     {"ci_lo", rep.hill->ci_lo},
                     {"ci_hi", rep.hill->ci_hi},
                     {"ci_width", rep.hill->ci_width},
                     {"degenerate", rep.hill->degenerate}};
  } else {
    j["hill"] = nullptr;
  }
  if (!rep.transform.empty()) {
    json pts = json::array();
    for (const auto& p : rep.transform) {
      pts.push_back(json{{"at", p.at},
                         {"re", p.value_re},
                         {"im", p.value_im},
                         {"se", p.se}});
    }
    j["transform"] = pts;
  } else {
    j["transform"] = nullptr;
  }
  if (!rep.qq.probs.empty()) {
    j["qq"] = json{{"probs", rep.qq.probs},
                   {"sample", rep.qq.sample_q},
                   {"reference", rep.qq.reference_q}};
  } else {
    j["qq"] = nullptr;
  }
  j["replicas"] = rep.replicas;
  j["truncation_count"] = rep.truncation_count;
  j["details"] = rep.details;
  j["timing"] = json{{"runtime_seconds", rep.runtime_seconds},
                     {"workers", rep.workers}};
  return j;
}

inline std::string format_double_17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::kIoError, "cannot open " + path + " for writing");
  out << body;
  require(out.good(), ErrorCode::kIoError, "write to " + path + " failed");
}

inline void write_report_sibling(const std::string& report_path,
                                 const std::string& csv) {
  std::string qq_path = report_path;
  const auto dot = qq_path.rfind('.');
  if (dot != std::string::npos) qq_path.resize(dot);
  qq_path += ".qq.csv";
  write_text_file(qq_path, csv);
}

inline void write_report(const StatReport& rep, const std::string& path) {
  write_text_file(path, report_to_json(rep).dump(2) + "\n");
  if (!rep.qq.probs.empty()) {
    std::string csv = "prob,sample_q,reference_q\n";
    for (std::size_t i = 0; i < rep.qq.probs.size(); ++i) {
      csv += format_double_17(rep.qq.probs[i]) + "," +
             format_double_17(rep.qq.sample_q[i]) + "," +
             format_double_17(rep.qq.reference_q[i]) + "\n";
    }
    write_report_sibling(path, csv);
  }
}

// ---------------------------------------------------------------------------
// Shared sampling drivers
// ---------------------------------------------------------------------------

namespace detail {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

// Experiment-scoped key; replica i draws from derive_key(key, i).
inline std::uint64_t experiment_key(const ExperimentConfig& cfg, ExperimentKind kind) {
  return derive_key(cfg.seed, static_cast<std::uint64_t>(kind) + 0x5057);
}

struct RegenAggregate {
  std::vector<double> bar_w;
  std::vector<double> tau;
  double mu = 0.0;      // mean tau_1
  double mean_barw = 0.0;
};

inline RegenAggregate run_regen_cycles(const EnvSpec& spec, std::uint64_t cycles,
                                       std::uint64_t key, unsigned workers) {
  RegenAggregate agg;
  agg.bar_w.resize(cycles);
  agg.tau.resize(cycles);
  parallel_for(cycles, workers, [&](std::size_t i) {
    RngStream rng(derive_key(key, i));
    const RegenSample s = simulate_regeneration(spec, rng);
    agg.bar_w[i] = static_cast<double>(s.bar_w);
    agg.tau[i] = static_cast<double>(s.tau1);
  });
  agg.mu = sample_mean(agg.tau);
  agg.mean_barw = sample_mean(agg.bar_w);
  return agg;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SPEED
// ---------------------------------------------------------------------------

inline StatReport run_speed_check(const ExperimentConfig& cfg) {
  require(cfg.spec.has_value(), ErrorCode::kMisconfigured, "SPEED needs a spec");
  detail::Timer timer;
  const SpeedReport analytic = speed(*cfg.spec);
  require(analytic.v > 0.0, ErrorCode::kUnsupportedCase,
          std::string("spec has zero speed: ") +
              zero_speed_reason_name(analytic.degenerate_reason));

  const std::uint64_t key = detail::experiment_key(cfg, ExperimentKind::kSpeed);
  std::vector<double> x_over_n(cfg.replicas);
  std::vector<double> t_over_n(cfg.replicas);
  std::atomic<std::uint64_t> truncations{0};
  parallel_for(cfg.replicas, cfg.workers, [&](std::size_t i) {
    const std::uint64_t rk = derive_key(key, i);
    EnvRealization env(*cfg.spec, derive_key(rk, 1));
    RngStream rng(derive_key(rk, 2));
    const WalkSample pos = simulate_position(env, cfg.n, rng);
    x_over_n[i] = static_cast<double>(pos.position) / static_cast<double>(cfg.n);
    EnvRealization env2(*cfg.spec, derive_key(rk, 3));
    RngStream rng2(derive_key(rk, 4));
    const auto rec = simulate_first_passage(env2, static_cast<std::int64_t>(cfg.n),
                                            rng2, cfg.step_budget);
    t_over_n[i] = static_cast<double>(rec.steps) / static_cast<double>(cfg.n);
    if (rec.truncated) truncations.fetch_add(1, std::memory_order_relaxed);
  });

  RngStream boot_rng(derive_key(key, 0xb007));
  const double mean_x = sample_mean(x_over_n);
  const double se_x = bootstrap_se_mean(x_over_n, 200, boot_rng);
  const double mean_t = sample_mean(t_over_n);
  const double se_t = bootstrap_se_mean(t_over_n, 200, boot_rng);
  const double sigmas = cfg.tolerance > 0.0 ? cfg.tolerance : Tolerances::kSpeedSigmas;

  StatReport rep;
  rep.kind = experiment_kind_name(ExperimentKind::kSpeed);
  rep.replicas = cfg.replicas;
  rep.truncation_count = truncations.load();
  rep.tolerance = sigmas;
  const bool x_ok = std::fabs(mean_x - analytic.v) <= sigmas * se_x;
  const bool t_ok = std::fabs(mean_t - analytic.inv_v) <= sigmas * se_t;
  rep.pass = x_ok && t_ok && rep.truncation_count == 0;
  rep.details = json{{"v_analytic", analytic.v},
                     {"inv_v_analytic", analytic.inv_v},
                     {"x_over_n_mean", mean_x},
                     {"x_over_n_se", se_x},
                     {"x_within_tolerance", x_ok},
                     {"t_over_n_mean", mean_t},
                     {"t_over_n_se", se_t},
                     {"t_within_tolerance", t_ok},
                     {"n", cfg.n}};
  rep.runtime_seconds = timer.seconds();
  rep.workers = cfg.workers;
  return rep;
}

// ---------------------------------------------------------------------------
// IDENTITY_31: walk left steps vs branching progeny, equality in law
// ---------------------------------------------------------------------------

inline StatReport run_identity_check(const ExperimentConfig& cfg) {
  require(cfg.spec.has_value(), ErrorCode::kMisconfigured, "IDENTITY_31 needs a spec");
  const std::uint64_t blocks_walk = cfg.n_blocks_walk ? cfg.n_blocks_walk : cfg.n_blocks;
  const std::uint64_t blocks_bpi = cfg.n_blocks_bpi ? cfg.n_blocks_bpi : cfg.n_blocks;
  require(blocks_walk == blocks_bpi, ErrorCode::kMisconfigured,
          "the identity requires the same block count on both sides");
  detail::Timer timer;
  const std::uint64_t key = detail::experiment_key(cfg, ExperimentKind::kIdentity31);
  const double p_threshold = Tolerances::kIdentityPValue;

  std::vector<double> pvalues;
  std::optional<KsResult> first_ks;
  std::atomic<std::uint64_t> budget_retries{0};
  for (std::uint64_t s = 0; s < cfg.seeds; ++s) {
    std::vector<double> walk_side(cfg.replicas);
    std::vector<double> bpi_side(cfg.replicas);
    const std::uint64_t seed_key = derive_key(key, s);
    parallel_for(cfg.replicas, cfg.workers, [&](std::size_t i) {
      // Budget exhaustion on the walk side is retried with a doubled budget
      // (and a fresh stream) per the operation contract; retries are counted.
      std::uint64_t budget = cfg.step_budget;
      std::uint64_t draw_key = derive_key(seed_key, 2 * i);
      for (int attempt = 0;; ++attempt) {
        try {
          walk_side[i] = static_cast<double>(annealed_left_steps(
              *cfg.spec, static_cast<int>(blocks_walk), draw_key, budget));
          break;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kBudgetExceeded || attempt >= 3) throw;
          budget_retries.fetch_add(1, std::memory_order_relaxed);
          budget *= 2;
          draw_key = derive_key(draw_key, 0xdead);
        }
      }
      bpi_side[i] = static_cast<double>(sample_annealed_progeny(
          *cfg.spec, static_cast<int>(blocks_bpi), derive_key(seed_key, 2 * i + 1)));
    });
    const KsResult ks = two_sample_ks(walk_side, bpi_side);
    if (!first_ks) first_ks = ks;
    pvalues.push_back(ks.pvalue);
  }
  std::size_t passed = 0;
  for (double p : pvalues) {
    if (p > p_threshold) ++passed;
  }
  const double fraction = static_cast<double>(passed) / static_cast<double>(pvalues.size());

  StatReport rep;
  rep.kind = experiment_kind_name(ExperimentKind::kIdentity31);
  rep.replicas = cfg.replicas;
  rep.ks = first_ks;
  rep.tolerance = cfg.tolerance > 0.0 ? cfg.tolerance : Tolerances::kIdentityPassFraction;
  rep.pass = fraction >= rep.tolerance;
  rep.details = json{{"n_blocks", blocks_walk},
                     {"seeds", cfg.seeds},
                     {"pvalues", pvalues},
                     {"pass_fraction", fraction},
                     {"pvalue_threshold", p_threshold},
                     {"budget_retries", budget_retries.load()}};
  rep.runtime_seconds = timer.seconds();
  rep.workers = cfg.workers;
  return rep;
}

// ---------------------------------------------------------------------------
// REGEN_TAIL: Hill index and tail constant of the cycle sums
// ---------------------------------------------------------------------------

inline StatReport run_regen_tail(const ExperimentConfig& cfg) {
  require(cfg.spec.has_value(), ErrorCode::kMisconfigured, "REGEN_TAIL needs a spec");
  detail::Timer timer;
  const std::uint64_t key = detail::experiment_key(cfg, ExperimentKind::kRegenTail);
  const auto agg = detail::run_regen_cycles(*cfg.spec, cfg.cycles, key, cfg.workers);

  double alpha_expected = cfg.alpha;
  if (alpha_expected <= 0.0) {
    const auto root = alpha_root(*cfg.spec);
    require(root.has_value(), ErrorCode::kMissingEstimate,
            "no alpha provided and no root of E rho^alpha = 1");
    alpha_expected = *root;
  }

  // Hill runs on the positive cycles (log spacings are unaffected by the
  // conditioning); the tail constant needs the unconditional survival, so it
  // sees every cycle including the extinct-at-once zeros.
  std::vector<double> positive;
  positive.reserve(agg.bar_w.size());
  for (double w : agg.bar_w) {
    if (w > 0.0) positive.push_back(w);
  }
  const auto k = static_cast<std::size_t>(
      std::pow(static_cast<double>(positive.size()), 0.6));
  RngStream boot_rng(derive_key(key, 0xb007));
  const TailEstimate hill = hill_estimate(positive, k, &boot_rng);
  const TailConstant constant = tail_constant_details(agg.bar_w, alpha_expected);

  // Geometric tail of tau_1: regression of log P{tau > n} on n.
  std::vector<double> ns, log_tail;
  {
    std::vector<double> sorted_tau = agg.tau;
    std::sort(sorted_tau.begin(), sorted_tau.end());
    const double total = static_cast<double>(sorted_tau.size());
    const double floor_count = 10.0;
    for (double n = 1.0;; n += 1.0) {
      const std::size_t above =
          sorted_tau.end() - std::upper_bound(sorted_tau.begin(), sorted_tau.end(), n);
      if (static_cast<double>(above) < floor_count) break;
      ns.push_back(n);
      log_tail.push_back(std::log(static_cast<double>(above) / total));
    }
  }
  LinearFit tau_fit;
  if (ns.size() >= 3) tau_fit = least_squares(ns, log_tail);

  const double tol = cfg.tolerance > 0.0 ? cfg.tolerance : Tolerances::kHillAlpha1;

  StatReport rep;
  rep.kind = experiment_kind_name(ExperimentKind::kRegenTail);
  rep.replicas = cfg.cycles;
  rep.hill = hill;
  rep.tolerance = tol;
  rep.pass = !hill.degenerate && std::fabs(hill.index_hat - alpha_expected) <= tol;
  rep.details = json{{"alpha_expected", alpha_expected},
                     {"c_hat", constant.c_hat},
                     {"c_hat_non_flat", constant.non_flat},
                     {"mu_tau", agg.mu},
                     {"mean_barw", agg.mean_barw},
                     {"tau_tail_slope", tau_fit.slope},
                     {"tau_tail_r2", tau_fit.r_squared},
                     {"tau_tail_points", ns.size()}};
  rep.runtime_seconds = timer.seconds();
  rep.workers = cfg.workers;
  return rep;
}

// ---------------------------------------------------------------------------
// LIMIT_T / LIMIT_X: stable-limit checks
// ---------------------------------------------------------------------------

namespace detail {

inline double reference_limit_draw_T(const NormingPlan& plan, RngStream& rng) {
  if (plan.alpha == 2.0) return 2.0 * sample_standard_normal(rng);
  const double s = stable_sample(StableSpec{plan.alpha}, rng);
  if (plan.alpha == 1.0 && plan.family == NormingFamily::kA) {
    // A-family alpha = 1 keeps the additive constant mu E xi / C
    return plan.mu * plan.e_xi / plan.c_hat + 2.0 * s;
  }
  return 2.0 * s;
}

}  // namespace detail

inline StatReport run_limit_check(const ExperimentConfig& cfg) {
  require(cfg.spec.has_value(), ErrorCode::kMisconfigured, "limit checks need a spec");
  const bool x_side = cfg.kind == ExperimentKind::kLimitX;
  detail::Timer timer;
  const std::uint64_t key = detail::experiment_key(cfg, cfg.kind);

  const RegimeReport regime = classify_regime(*cfg.spec);
  require(regime.case_label != RegimeCase::kUnsupported, ErrorCode::kUnsupportedCase,
          "the spec does not fall in a supported regime");

  StatReport rep;
  rep.kind = experiment_kind_name(cfg.kind);
  rep.replicas = cfg.replicas;
  rep.workers = cfg.workers;

  std::vector<double> statistic(cfg.replicas);
  std::vector<double> reference(cfg.replicas);
  std::atomic<std::uint64_t> truncations{0};
  double effective_alpha = 0.0;

  if (regime.case_label == RegimeCase::kD) {
    // Prop-2.2 style check: analytic centering, empirically scaled spread;
    // sigma_0 has no closed form. The reference is a standard normal.
    effective_alpha = 2.0;
    const SpeedReport sp = speed(*cfg.spec);
    std::vector<double> raw(cfg.replicas);
    parallel_for(cfg.replicas, cfg.workers, [&](std::size_t i) {
      const std::uint64_t rk = derive_key(key, i);
      EnvRealization env(*cfg.spec, derive_key(rk, 1));
      RngStream rng(derive_key(rk, 2));
      if (x_side) {
        raw[i] = static_cast<double>(simulate_position(env, cfg.n, rng).position);
      } else {
        const auto rec = simulate_first_passage(env, static_cast<std::int64_t>(cfg.n),
                                                rng, cfg.step_budget);
        if (rec.truncated) truncations.fetch_add(1, std::memory_order_relaxed);
        raw[i] = static_cast<double>(rec.steps);
      }
    });
    const double center = x_side ? sp.v * static_cast<double>(cfg.n)
                                 : static_cast<double>(cfg.n) / sp.v;
    const double sd = std::sqrt(sample_variance(raw));
    for (std::size_t i = 0; i < raw.size(); ++i) {
      statistic[i] = (raw[i] - center) / sd;
    }
    RngStream ref_rng(derive_key(key, 0x5f5f));
    for (auto& r : reference) r = sample_standard_normal(ref_rng);
    rep.details["case"] = "D";
    rep.details["sigma0_hat"] = sd / std::sqrt(static_cast<double>(cfg.n));
  } else {
    // Prerun: regeneration cycles feed the norming plan.
    const auto agg = detail::run_regen_cycles(*cfg.spec, cfg.cycles,
                                              derive_key(key, 0x9e9e), cfg.workers);
    effective_alpha = regime.effective_alpha();
    require(!x_side || effective_alpha != 1.0, ErrorCode::kUnsupportedCase,
            "the X-side alpha = 1 norming sequences are not supported");
    NormingEstimates est;
    est.mu = agg.mu;
    est.e_xi = xi_moment(*cfg.spec, 1.0);
    if (effective_alpha > 1.0) {
      // E W-bar = E Y_1 E tau_1 (Wald-type identity): the closed form for
      // E Y_1 beats the raw cycle mean, whose error is order n^(1/alpha - 1)
      // for these heavy tails and would shift the centering by multiples of
      // b(n).
      const double e_y1 = expected_Y1(*cfg.spec);
      est.e_barw = std::isfinite(e_y1) ? e_y1 * agg.mu : agg.mean_barw;
    }
    if (regime.case_label == RegimeCase::kA1 ||
        regime.case_label == RegimeCase::kA2 ||
        regime.case_label == RegimeCase::kA3) {
      // Unconditional survival: extinct-at-once cycles stay in the sample.
      est.c_hat = tail_constant_estimate(agg.bar_w, effective_alpha);
    }
    est.barw_samples = agg.bar_w;
    const NormingPlan plan = build_norming_plan(regime, est);

    const double nd = static_cast<double>(cfg.n);
    parallel_for(cfg.replicas, cfg.workers, [&](std::size_t i) {
      const std::uint64_t rk = derive_key(key, i);
      EnvRealization env(*cfg.spec, derive_key(rk, 1));
      RngStream rng(derive_key(rk, 2));
      if (!x_side) {
        const auto rec = simulate_first_passage(env, static_cast<std::int64_t>(cfg.n),
                                                rng, cfg.step_budget);
        if (rec.truncated) truncations.fetch_add(1, std::memory_order_relaxed);
        statistic[i] = (static_cast<double>(rec.steps) - plan.a_at(nd)) / plan.b_at(nd);
      } else {
        const double xk = static_cast<double>(simulate_position(env, cfg.n, rng).position);
        if (plan.alpha < 1.0) {
          statistic[i] = xk * plan.c_hat / (plan.mu * plan.e_xi * std::pow(nd, plan.alpha));
        } else {
          const double a = plan.a_coeff;
          const double scale = plan.alpha == 2.0
                                   ? std::pow(a, -1.5) * plan.b_at(nd)
                                   : std::pow(a, -(1.0 + 1.0 / plan.alpha)) * plan.b_at(nd);
          statistic[i] = (xk - nd / a) / scale;
        }
      }
    });

    RngStream ref_rng(derive_key(key, 0x5f5f));
    for (auto& r : reference) {
      if (!x_side) {
        r = detail::reference_limit_draw_T(plan, ref_rng);
      } else if (plan.alpha < 1.0) {
        r = mittag_leffler_sample(plan.alpha, ref_rng) * std::pow(2.0, -plan.alpha);
      } else if (plan.alpha == 2.0) {
        r = 2.0 * sample_standard_normal(ref_rng);
      } else {
        r = -2.0 * stable_sample(StableSpec{plan.alpha}, ref_rng);
      }
    }
    rep.details["case"] = regime_case_name(regime.case_label);
    rep.details["mu_tau"] = plan.mu;
    rep.details["e_xi"] = plan.e_xi;
    rep.details["e_barw"] = plan.e_barw;
    rep.details["c_hat"] = plan.c_hat;
    rep.details["a_coeff"] = plan.a_coeff;
    rep.details["a_n"] = plan.a_at(nd);
    rep.details["b_n"] = plan.b_at(nd);
  }

  const KsResult ks = two_sample_ks(statistic, reference);
  rep.ks = ks;
  rep.qq = make_qq(statistic, reference);
  double tol = cfg.tolerance;
  if (tol <= 0.0) {
    tol = (effective_alpha == 1.0) ? Tolerances::kLimitKsAlpha1 : Tolerances::kLimitKs;
  }
  rep.tolerance = tol;
  rep.truncation_count = truncations.load();
  rep.pass = ks.statistic <= tol && rep.truncation_count == 0;
  rep.details["alpha"] = effective_alpha;
  rep.details["n"] = cfg.n;
  rep.runtime_seconds = timer.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// CRITGW: exact-moment, recursion, theta and tail checks
// ---------------------------------------------------------------------------

inline StatReport run_critgw_check(const ExperimentConfig& cfg) {
  detail::Timer timer;
  const std::uint64_t key = detail::experiment_key(cfg, ExperimentKind::kCritGw);
  StatReport rep;
  rep.kind = experiment_kind_name(ExperimentKind::kCritGw);
  rep.replicas = cfg.replicas;
  rep.workers = cfg.workers;
  json rows = json::array();
  bool all_pass = true;

  const auto add_row = [&](const std::string& quantity, double exact,
                           double estimate, double se, bool ok) {
    rows.push_back(json{{"quantity", quantity},
                        {"exact", exact},
                        {"estimate", estimate},
                        {"se", se},
                        {"pass", ok}});
    all_pass = all_pass && ok;
  };

  if (cfg.critgw_check == "moments") {
    const std::vector<std::uint64_t> gens{1, 2, 5, 10, 20};
    for (std::uint64_t n : gens) {
      const CritMoments exact = crit_moments(n);
      std::vector<double> w(cfg.replicas), y(cfg.replicas);
      parallel_for(cfg.replicas, cfg.workers, [&](std::size_t i) {
        RngStream rng(derive_key(derive_key(key, n), i));
        w[i] = static_cast<double>(simulate_w_crit(n, rng));
        y[i] = static_cast<double>(simulate_crit_lineage(n, rng).y_n);
      });
      const double w_mean = sample_mean(w);
      const double w_se = std::sqrt(sample_variance(w) / static_cast<double>(cfg.replicas));
      add_row("mean_w_" + std::to_string(n), exact.mean_w, w_mean, w_se,
              std::fabs(w_mean - exact.mean_w) <= 3.0 * w_se);
      const double y_var = sample_variance(y);
      add_row("var_y_" + std::to_string(n), exact.var_y, y_var, 0.0,
              std::fabs(y_var - exact.var_y) <= 0.05 * exact.var_y);
    }
  } else if (cfg.critgw_check == "lt") {
    const std::vector<std::pair<double, int>> grid{{0.05, 3}, {0.02, 6}};
    for (const auto& [x, jgen] : grid) {
      const double exact = lt_recursion(x, jgen);
      std::vector<double> vals(cfg.replicas);
      parallel_for(cfg.replicas, cfg.workers, [&](std::size_t i) {
        RngStream rng(derive_key(derive_key(key, jgen), i));
        vals[i] = std::exp(x * static_cast<double>(simulate_crit_lineage(jgen, rng).y_n));
      });
      char name[48];
      std::snprintf(name, sizeof(name), "a_%d_x%.3g", jgen, x);
      const double mean = sample_mean(vals);
      const double se = std::sqrt(sample_variance(vals) / static_cast<double>(cfg.replicas));
      add_row(name, exact, mean, se, std::fabs(mean - exact) <= 3.0 * se);
    }
  } else if (cfg.critgw_check == "theta") {
    // Empirical LT of n^-2 W_n at n = 200, s = 1 against 1/cosh(1).
    {
      const std::uint64_t n = 200;
      std::vector<double> scaled(cfg.replicas);
      parallel_for(cfg.replicas, cfg.workers, [&](std::size_t i) {
        RngStream rng(derive_key(derive_key(key, 1), i));
        scaled[i] = static_cast<double>(simulate_w_crit(n, rng)) /
                    static_cast<double>(n * n);
      });
      const std::vector<double> grid{1.0};
      const auto tf = empirical_transform(scaled, grid, TransformKind::kLaplace);
      rep.transform = tf;
      add_row("lt_n200_s1", theta_lt(1.0), tf[0].value_re, tf[0].se,
              std::fabs(tf[0].value_re - theta_lt(1.0)) <= 0.005);
    }
    // Moments of n^-2 W_n at n = 500 against E theta^k, k = 1, 2.
    {
      const std::uint64_t n = 500;
      std::vector<double> scaled(cfg.replicas);
      parallel_for(cfg.replicas, cfg.workers, [&](std::size_t i) {
        RngStream rng(derive_key(derive_key(key, 2), i));
        scaled[i] = static_cast<double>(simulate_w_crit(n, rng)) /
                    static_cast<double>(n * n);
      });
      double m1 = 0.0, m2 = 0.0;
      for (double v : scaled) {
        m1 += v;
        m2 += v * v;
      }
      m1 /= static_cast<double>(cfg.replicas);
      m2 /= static_cast<double>(cfg.replicas);
      add_row("theta_moment_1", theta_moment(1), m1, 0.0,
              std::fabs(m1 - theta_moment(1)) <= 0.05 * theta_moment(1));
      add_row("theta_moment_2", theta_moment(2), m2, 0.0,
              std::fabs(m2 - theta_moment(2)) <= 0.05 * theta_moment(2));
    }
  } else if (cfg.critgw_check == "tail") {
    const double alpha = cfg.alpha > 0.0 ? cfg.alpha : 1.0;
    XiDiscretePareto varsigma;
    varsigma.beta = 2.0 * alpha;
    RngStream rng(derive_key(key, 3));
    const WTailProbe probe =
        tail_of_w_varsigma(XiLaw{varsigma}, alpha, cfg.replicas, rng);
    rep.hill = probe.hill;
    add_row("w_varsigma_hill", alpha, probe.hill.index_hat, 0.0,
            std::fabs(probe.hill.index_hat - alpha) <= 0.15);
    if (probe.prefactor_exact > 0.0) {
      add_row("w_varsigma_prefactor", probe.prefactor_exact, probe.prefactor_hat,
              0.0,
              std::fabs(probe.prefactor_hat - probe.prefactor_exact) <=
                  0.25 * probe.prefactor_exact);
    }
  } else {
    raise(ErrorCode::kMisconfigured,
          "unknown critgw check '" + cfg.critgw_check + "'");
  }

  rep.pass = all_pass;
  rep.tolerance = 0.0;
  rep.details = json{{"check", cfg.critgw_check}, {"rows", rows}};
  rep.runtime_seconds = timer.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// PERPETUITY: Kesten tail of the truncated series
// ---------------------------------------------------------------------------

inline StatReport run_perpetuity(const ExperimentConfig& cfg) {
  require(cfg.spec.has_value(), ErrorCode::kMisconfigured, "PERPETUITY needs a spec");
  detail::Timer timer;
  const std::uint64_t key = detail::experiment_key(cfg, ExperimentKind::kPerpetuity);

  double alpha_expected = cfg.alpha;
  if (alpha_expected <= 0.0) {
    const auto root = alpha_root(*cfg.spec);
    require(root.has_value(), ErrorCode::kMissingEstimate,
            "no alpha provided and no root of E rho^alpha = 1");
    alpha_expected = *root;
  }

  std::vector<double> samples(cfg.replicas);
  std::atomic<std::uint64_t> truncations{0};
  parallel_for(cfg.replicas, cfg.workers, [&](std::size_t i) {
    RngStream rng(derive_key(key, i));
    try {
      samples[i] = perpetuity_sample(*cfg.spec, rng, cfg.eps);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTruncationCap) throw;
      truncations.fetch_add(1, std::memory_order_relaxed);
      samples[i] = 0.0;
    }
  });
  std::vector<double> positive;
  positive.reserve(samples.size());
  for (double s : samples) {
    if (s > 0.0) positive.push_back(s);
  }
  const auto k = static_cast<std::size_t>(
      std::pow(static_cast<double>(positive.size()), 0.6));
  RngStream boot_rng(derive_key(key, 0xb007));
  const TailEstimate hill = hill_estimate(positive, k, &boot_rng);

  const double tol = cfg.tolerance > 0.0 ? cfg.tolerance : Tolerances::kPerpetuityHill;
  StatReport rep;
  rep.kind = experiment_kind_name(ExperimentKind::kPerpetuity);
  rep.replicas = cfg.replicas;
  rep.hill = hill;
  rep.tolerance = tol;
  rep.truncation_count = truncations.load();
  rep.pass = !hill.degenerate &&
             std::fabs(hill.index_hat - alpha_expected) <= tol &&
             rep.truncation_count == 0;
  rep.details = json{{"alpha_expected", alpha_expected},
                     {"mean", sample_mean(positive)},
                     {"eps", cfg.eps}};
  rep.runtime_seconds = timer.seconds();
  rep.workers = cfg.workers;
  return rep;
}

// ---------------------------------------------------------------------------
// Dispatch + persistence
// ---------------------------------------------------------------------------

inline StatReport run_experiment(const ExperimentConfig& cfg) {
  StatReport rep;
  switch (cfg.kind) {
    case ExperimentKind::kSpeed: rep = run_speed_check(cfg); break;
    case ExperimentKind::kIdentity31: rep = run_identity_check(cfg); break;
    case ExperimentKind::kRegenTail: rep = run_regen_tail(cfg); break;
    case ExperimentKind::kLimitT:
    case ExperimentKind::kLimitX: rep = run_limit_check(cfg); break;
    case ExperimentKind::kCritGw: rep = run_critgw_check(cfg); break;
    case ExperimentKind::kPerpetuity: rep = run_perpetuity(cfg); break;
  }
  if (cfg.spec.has_value()) rep.details["spec"] = to_json(*cfg.spec);
  rep.details["seed"] = cfg.seed;
  if (!cfg.out_path.empty()) write_report(rep, cfg.out_path);
  return rep;
}

}  // namespace sparsewalk

#endif  // SPARSEWALK_HARNESS_HPP_
