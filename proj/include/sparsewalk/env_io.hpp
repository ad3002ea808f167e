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

#ifndef SPARSEWALK_ENV_IO_HPP_
#define SPARSEWALK_ENV_IO_HPP_

#include <fstream>
#include <string>

#include <json.hpp>

#include "sparsewalk/env.hpp"
#include "sparsewalk/error.hpp"

namespace sparsewalk {

using json = nlohmann::ordered_json;

// JSON schema: {"xi": {...}, "lambda": {...}, "coupling": {...}}; see
// docs/env_spec.schema.json. Round-trips are lossless (doubles survive
// serialize/parse exactly).

inline json to_json(const XiLaw& law) {
  return std::visit(
      [](const auto& l) -> json {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, XiDeterministic>) {
          return json{{"family", "deterministic"}, {"value", l.value}};
        } else if constexpr (std::is_same_v<T, XiUniformInt>) {
          return json{{"family", "uniform_int"}, {"max", l.max}};
        } else if constexpr (std::is_same_v<T, XiGeometric>) {
          return json{{"family", "geometric1"}, {"p", l.p}};
        } else if constexpr (std::is_same_v<T, XiDiscretePareto>) {
          const char* ell = l.ell == SlowFactor::kConstant ? "const"
                            : l.ell == SlowFactor::kInverseLog ? "inverse_log"
                                                               : "log";
          return json{{"family", "discrete_pareto"},
                      {"beta", l.beta},
                      {"ell", ell},
                      {"c", l.c}};
        } else {
          return json{{"family", "finite_table"},
                      {"values", l.values},
                      {"probs", l.probs}};
        }
      },
      law);
}

inline json to_json(const LambdaLaw& law) {
  return std::visit(
      [](const auto& l) -> json {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, LambdaConstant>) {
          return json{{"family", "constant"}, {"value", l.value}};
        } else if constexpr (std::is_same_v<T, LambdaBeta>) {
          return json{{"family", "beta"}, {"a", l.a}, {"b", l.b}};
        } else if constexpr (std::is_same_v<T, LambdaLogitLogNormal>) {
          return json{{"family", "logit_lognormal_rho"},
                      {"mean_log_rho", l.mean},
                      {"var_log_rho", l.variance}};
        } else {
          return json{{"family", "finite_table"},
                      {"values", l.values},
                      {"probs", l.probs}};
        }
      },
      law);
}

inline json to_json(const Coupling& coupling) {
  return std::visit(
      [](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, IndependentCoupling>) {
          return json{{"kind", "independent"}};
        } else if constexpr (std::is_same_v<T, ComonotoneCoupling>) {
          return json{{"kind", "comonotone"}};
        } else {
          return json{{"kind", "joint_finite_table"}, {"matrix", c.probs}};
        }
      },
      coupling);
}

inline json to_json(const EnvSpec& spec) {
  return json{{"xi", to_json(spec.xi)},
              {"lambda", to_json(spec.lambda)},
              {"coupling", to_json(spec.coupling)}};
}

namespace detail {

inline const json& field(const json& j, const char* key) {
  require(j.contains(key), ErrorCode::kInvalidParam,
          std::string("missing field '") + key + "'");
  return j.at(key);
}

}  // namespace detail

inline XiLaw xi_law_from_json(const json& j) {
  const std::string family = detail::field(j, "family").get<std::string>();
  if (family == "deterministic") {
    return XiDeterministic{detail::field(j, "value").get<std::uint64_t>()};
  }
  if (family == "uniform_int") {
    return XiUniformInt{detail::field(j, "max").get<std::uint64_t>()};
  }
  if (family == "geometric1") {
    return XiGeometric{detail::field(j, "p").get<double>()};
  }
  if (family == "discrete_pareto") {
    XiDiscretePareto law;
    law.beta = detail::field(j, "beta").get<double>();
    if (j.contains("ell")) {
      const std::string ell = j.at("ell").get<std::string>();
      if (ell == "const") law.ell = SlowFactor::kConstant;
      else if (ell == "inverse_log") law.ell = SlowFactor::kInverseLog;
      else if (ell == "log") law.ell = SlowFactor::kLog;
      else raise(ErrorCode::kInvalidParam, "unknown ell shape '" + ell + "'");
    }
    if (j.contains("c")) law.c = j.at("c").get<double>();
    return law;
  }
  if (family == "finite_table") {
    XiFiniteTable law;
    law.values = detail::field(j, "values").get<std::vector<std::uint64_t>>();
    law.probs = detail::field(j, "probs").get<std::vector<double>>();
    return law;
  }
  raise(ErrorCode::kInvalidParam, "unknown xi family '" + family + "'");
}

inline LambdaLaw lambda_law_from_json(const json& j) {
  const std::string family = detail::field(j, "family").get<std::string>();
  if (family == "constant") {
    return LambdaConstant{detail::field(j, "value").get<double>()};
  }
  if (family == "beta") {
    return LambdaBeta{detail::field(j, "a").get<double>(),
                      detail::field(j, "b").get<double>()};
  }
  if (family == "logit_lognormal_rho") {
    return LambdaLogitLogNormal{detail::field(j, "mean_log_rho").get<double>(),
                                detail::field(j, "var_log_rho").get<double>()};
  }
  if (family == "finite_table") {
    LambdaFiniteTable law;
    law.values = detail::field(j, "values").get<std::vector<double>>();
    law.probs = detail::field(j, "probs").get<std::vector<double>>();
    return law;
  }
  raise(ErrorCode::kInvalidParam, "unknown lambda family '" + family + "'");
}

inline Coupling coupling_from_json(const json& j) {
  const std::string kind = detail::field(j, "kind").get<std::string>();
  if (kind == "independent") return IndependentCoupling{};
  if (kind == "comonotone") return ComonotoneCoupling{};
  if (kind == "joint_finite_table") {
    JointTableCoupling c;
    c.probs = detail::field(j, "matrix").get<std::vector<std::vector<double>>>();
    return c;
  }
  raise(ErrorCode::kInvalidParam, "unknown coupling kind '" + kind + "'");
}

// Parses and validates; this is the config-record entry point.
inline EnvSpec build_env_spec(const json& config) {
  EnvSpec spec;
  spec.xi = xi_law_from_json(detail::field(config, "xi"));
  spec.lambda = lambda_law_from_json(detail::field(config, "lambda"));
  if (config.contains("coupling")) {
    spec.coupling = coupling_from_json(config.at("coupling"));
  }
  return make_env_spec(std::move(spec));
}

inline EnvSpec load_env_spec(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kIoError, "cannot open spec file " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    raise(ErrorCode::kInvalidParam,
          "spec file " + path + " is not valid JSON: " + e.what());
  }
  return build_env_spec(j);
}

}  // namespace sparsewalk

#endif  // SPARSEWALK_ENV_IO_HPP_
