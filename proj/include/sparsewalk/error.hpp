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

#ifndef SPARSEWALK_ERROR_HPP_
#define SPARSEWALK_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sparsewalk {

enum class ErrorCode {
  kInvalidParam,
  kNumericFailure,
  kNoRootRegion,
  kNotTransient,
  kInfiniteMeanXi,
  kBudgetExceeded,
  kTruncationCap,
  kNonpositiveSample,
  kInsufficientTail,
  kMissingEstimate,
  kUnsupportedCase,
  kTooFewSamples,
  kPreconditionViolated,
  kIoError,
  kMisconfigured,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidParam: return "INVALID_PARAM";
    case ErrorCode::kNumericFailure: return "NUMERIC_FAILURE";
    case ErrorCode::kNoRootRegion: return "NO_ROOT_REGION";
    case ErrorCode::kNotTransient: return "NOT_TRANSIENT";
    case ErrorCode::kInfiniteMeanXi: return "INFINITE_MEAN_XI";
    case ErrorCode::kBudgetExceeded: return "BUDGET_EXCEEDED";
    case ErrorCode::kTruncationCap: return "TRUNCATION_CAP";
    case ErrorCode::kNonpositiveSample: return "NONPOSITIVE_SAMPLE";
    case ErrorCode::kInsufficientTail: return "INSUFFICIENT_TAIL";
    case ErrorCode::kMissingEstimate: return "MISSING_ESTIMATE";
    case ErrorCode::kUnsupportedCase: return "UNSUPPORTED_CASE";
    case ErrorCode::kTooFewSamples: return "TOO_FEW_SAMPLES";
    case ErrorCode::kPreconditionViolated: return "PRECONDITION_VIOLATED";
    case ErrorCode::kIoError: return "IO_ERROR";
    case ErrorCode::kMisconfigured: return "MISCONFIGURED";
  }
  return "UNKNOWN";
}

// All library failures are reported through this exception; the CLI maps the
// code to an exit status (config errors -> 2, everything else -> 3).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) raise(code, message);
}

}  // namespace sparsewalk

#endif  // SPARSEWALK_ERROR_HPP_
