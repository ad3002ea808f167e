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

#ifndef SPARSEWALK_WALK_HPP_
#define SPARSEWALK_WALK_HPP_

#include <cstdint>
#include <map>
#include <vector>

#include "sparsewalk/env.hpp"
#include "sparsewalk/error.hpp"
#include "sparsewalk/rng.hpp"

namespace sparsewalk {

inline constexpr std::uint64_t kDefaultStepBudget = 1000000000ull;

struct FirstPassageRecord {
  std::int64_t target_n = 0;
  std::uint64_t steps = 0;  // T_n when not truncated, steps consumed otherwise
  std::map<std::int64_t, std::uint64_t> left_counts;  // i -> U_i^{(n)}, nonzero only
  std::int64_t min_site_visited = 0;
  bool truncated = false;
  std::uint64_t left_steps_total = 0;   // sum of all U_i
  std::uint64_t left_steps_nonneg = 0;  // sum over 0 <= i <= n
};

struct WalkSample {
  std::uint64_t k_steps = 0;
  std::int64_t position = 0;
  std::vector<std::int64_t> trajectory;  // filled only on request
};

namespace detail {

// Dense omega/left-count window around the visited range. The environment is
// consulted once per newly visited site.
class SiteWindow {
 public:
  explicit SiteWindow(EnvRealization& env) : env_(env) {}

  double omega(std::int64_t site) {
    ensure(site);
    const std::size_t idx = static_cast<std::size_t>(site - lo_);
    if (omega_[idx] < 0.0) omega_[idx] = env_.omega_at(site);
    return omega_[idx];
  }

  void count_left(std::int64_t site) {
    ensure(site);
    ++left_[static_cast<std::size_t>(site - lo_)];
  }

  std::int64_t lo() const { return lo_; }
  const std::vector<std::uint64_t>& left_counts() const { return left_; }

 private:
  void ensure(std::int64_t site) {
    if (omega_.empty()) {
      lo_ = site - 8;
      omega_.assign(64, -1.0);
      left_.assign(64, 0);
      return;
    }
    while (site < lo_) {
      const std::size_t grow = omega_.size();
      omega_.insert(omega_.begin(), grow, -1.0);
      left_.insert(left_.begin(), grow, 0);
      lo_ -= static_cast<std::int64_t>(grow);
    }
    while (site >= lo_ + static_cast<std::int64_t>(omega_.size())) {
      omega_.resize(omega_.size() * 2, -1.0);
      left_.resize(left_.size() * 2, 0);
    }
  }

  EnvRealization& env_;
  std::int64_t lo_ = 0;
  std::vector<double> omega_;
  std::vector<std::uint64_t> left_;
};

}  // namespace detail

// Exact quenched simulation of T_n = inf{k >= 0 : X_k = n} from X_0 = 0.
// One uniform draw per step. Budget exhaustion is reported in-band.
inline FirstPassageRecord simulate_first_passage(
    EnvRealization& env, std::int64_t n, RngStream& rng,
    std::uint64_t budget = kDefaultStepBudget) {
  require(n >= 1, ErrorCode::kInvalidParam, "target site must be >= 1");
  require(budget >= static_cast<std::uint64_t>(n), ErrorCode::kInvalidParam,
          "step budget below target distance");
  FirstPassageRecord rec;
  rec.target_n = n;
  detail::SiteWindow window(env);
  std::int64_t x = 0;
  std::uint64_t steps = 0;
  while (x != n && steps < budget) {
    if (rng.bernoulli(window.omega(x))) {
      ++x;
    } else {
      window.count_left(x);
      --x;
      if (x < rec.min_site_visited) rec.min_site_visited = x;
    }
    ++steps;
  }
  rec.steps = steps;
  rec.truncated = (x != n);
  const auto& counts = window.left_counts();
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    const std::int64_t site = window.lo() + static_cast<std::int64_t>(i);
    rec.left_counts.emplace(site, counts[i]);
    rec.left_steps_total += counts[i];
    if (site >= 0 && site <= n) rec.left_steps_nonneg += counts[i];
  }
  return rec;
}

// X_k after exactly k steps.
inline WalkSample simulate_position(EnvRealization& env, std::uint64_t k,
                                    RngStream& rng,
                                    bool keep_trajectory = false) {
  WalkSample out;
  out.k_steps = k;
  detail::SiteWindow window(env);
  std::int64_t x = 0;
  if (keep_trajectory) {
    out.trajectory.reserve(k + 1);
    out.trajectory.push_back(0);
  }
  for (std::uint64_t t = 0; t < k; ++t) {
    x += rng.bernoulli(window.omega(x)) ? 1 : -1;
    if (keep_trajectory) out.trajectory.push_back(x);
  }
  out.position = x;
  return out;
}

// Walk side of the distributional identity with the branching process:
// draws a fresh environment, walks to S_{n_blocks}, and returns the total
// left-step count over the nonnegative sites 0..S_n.
inline std::uint64_t annealed_left_steps(const EnvSpec& spec, int n_blocks,
                                         std::uint64_t seed,
                                         std::uint64_t budget = kDefaultStepBudget) {
  require(n_blocks >= 1, ErrorCode::kInvalidParam, "need at least one block");
  EnvRealization env(spec, derive_key(seed, 0x656e76));
  RngStream rng(derive_key(seed, 0x77616c6b));
  const std::int64_t target = env.marked_site(n_blocks);
  const FirstPassageRecord rec = simulate_first_passage(env, target, rng, budget);
  if (rec.truncated) {
    raise(ErrorCode::kBudgetExceeded,
          "first passage to block " + std::to_string(n_blocks) +
              " exceeded the step budget");
  }
  return rec.left_steps_nonneg;
}

}  // namespace sparsewalk

#endif  // SPARSEWALK_WALK_HPP_
