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

#ifndef SPARSEWALK_BRANCHING_HPP_
#define SPARSEWALK_BRANCHING_HPP_

#include <cstdint>
#include <vector>

#include "sparsewalk/env.hpp"
#include "sparsewalk/error.hpp"
#include "sparsewalk/rng.hpp"

namespace sparsewalk {

inline constexpr std::uint64_t kDefaultBlockBudget = 100000ull;

// One generation of the branching process with one immigrant: the z current
// particles plus the immigrant each reproduce Geom(omega), so the next
// generation is NegativeBinomial(z + 1, omega). Aggregated sampling keeps
// this O(1) regardless of the population size.
inline std::uint64_t bpi_generation(std::uint64_t z, double omega,
                                    RngStream& rng) {
  return sample_negative_binomial(rng, z + 1, omega);
}

struct BlockStats {
  std::uint64_t z_in = 0;   // particles entering at the previous marked site
  std::uint64_t z_out = 0;  // particles at this block's marked site
  std::uint64_t w0 = 0;     // block-born progeny in the interior generations
  std::uint64_t wdown = 0;  // carried-in progeny in the interior generations
  std::uint64_t w_block() const { return w0 + wdown + z_out; }
};

// Evolves one environment block: xi - 1 interior generations at omega = 1/2
// followed by the marked generation at omega = lambda. Two subpopulations are
// tracked: descendants of the carried-in particles (wdown side) and everyone
// born from immigrants arriving inside the block (w0 side). Immigrants join
// the block-born side; interior generations are counted into w0/wdown, the
// marked generation is pooled into z_out.
inline BlockStats simulate_block(std::uint64_t z_in, std::uint64_t xi,
                                 double lambda, RngStream& rng) {
  require(xi >= 1, ErrorCode::kInvalidParam, "block length must be >= 1");
  require(lambda > 0.0 && lambda < 1.0, ErrorCode::kInvalidParam,
          "lambda must lie in (0,1)");
  BlockStats stats;
  stats.z_in = z_in;
  std::uint64_t born = 0;      // block-born particles in the current generation
  std::uint64_t carried = z_in;
  for (std::uint64_t g = 1; g < xi; ++g) {
    born = bpi_generation(born, 0.5, rng);  // +1 inside is the immigrant
    carried = carried == 0 ? 0 : sample_negative_binomial(rng, carried, 0.5);
    stats.w0 += born;
    stats.wdown += carried;
  }
  stats.z_out = bpi_generation(born + carried, lambda, rng);
  return stats;
}

struct RegenSample {
  std::uint64_t tau1 = 0;       // blocks until extinction at a marked site
  std::uint64_t bar_w = 0;      // total progeny over generations 1..S_tau
  std::uint64_t sum_w0 = 0;
  std::uint64_t sum_wdown = 0;
  std::uint64_t sum_z = 0;
  std::int64_t s_tau = 0;       // S_{tau_1}
};

// One regeneration cycle: chains blocks with fresh iid (xi, lambda) draws
// from Z_0 = 0 until the marked-site population hits zero. tau_1 has a
// geometric tail for transient specs, so the default budget is effectively
// unreachable; exhausting it signals a misconfigured spec.
inline RegenSample simulate_regeneration(
    const EnvSpec& spec, RngStream& rng,
    std::uint64_t block_budget = kDefaultBlockBudget) {
  RegenSample cycle;
  std::uint64_t z = 0;
  for (std::uint64_t i = 1; i <= block_budget; ++i) {
    const BlockDraw draw = draw_block_pair(spec, rng);
    const BlockStats stats = simulate_block(z, draw.xi, draw.lambda, rng);
    cycle.sum_w0 += stats.w0;
    cycle.sum_wdown += stats.wdown;
    cycle.sum_z += stats.z_out;
    cycle.s_tau += static_cast<std::int64_t>(draw.xi);
    z = stats.z_out;
    if (z == 0) {
      cycle.tau1 = i;
      cycle.bar_w = cycle.sum_w0 + cycle.sum_wdown + cycle.sum_z;
      return cycle;
    }
  }
  raise(ErrorCode::kBudgetExceeded,
        "regeneration cycle exceeded the block budget");
}

// Branching side of the distributional identity: fresh environment, evolve
// through blocks 1..n_blocks, return W_{S_n} (total progeny in generations
// 1..S_n).
inline std::uint64_t sample_annealed_progeny(const EnvSpec& spec, int n_blocks,
                                             std::uint64_t seed) {
  require(n_blocks >= 1, ErrorCode::kInvalidParam, "need at least one block");
  RngStream rng(derive_key(seed, 0x627069));
  std::uint64_t z = 0;
  std::uint64_t total = 0;
  for (int i = 0; i < n_blocks; ++i) {
    const BlockDraw draw = draw_block_pair(spec, rng);
    const BlockStats stats = simulate_block(z, draw.xi, draw.lambda, rng);
    total += stats.w_block();
    z = stats.z_out;
  }
  return total;
}

// Quenched mean of the marked-site population: the random difference
// equation R_k = rho_k xi_k + rho_k R_{k-1}, R_0 = 0, evaluated on the
// realized environment.
inline double quenched_mean_recursion(EnvRealization& env, int k) {
  require(k >= 0, ErrorCode::kInvalidParam, "block count must be >= 0");
  double r = 0.0;
  for (int i = 1; i <= k; ++i) {
    const BlockDraw& b = env.block(i);
    r = b.rho * static_cast<double>(b.xi) + b.rho * r;
  }
  return r;
}

// Evolves the chain on a frozen environment (quenched law); used by tests
// against the mean recursion. Returns the marked-site populations Z_1..Z_k.
inline std::vector<std::uint64_t> quenched_block_chain(EnvRealization& env,
                                                       int k, RngStream& rng) {
  std::vector<std::uint64_t> out;
  out.reserve(k);
  std::uint64_t z = 0;
  for (int i = 1; i <= k; ++i) {
    const BlockDraw& b = env.block(i);
    z = simulate_block(z, b.xi, b.lambda, rng).z_out;
    out.push_back(z);
  }
  return out;
}

}  // namespace sparsewalk

#endif  // SPARSEWALK_BRANCHING_HPP_
