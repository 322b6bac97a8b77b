/* Copyright 2026 The QTST Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qtst {

using Complex = std::complex<double>;

enum class ErrorCode {
  kIndexOutOfRange,
  kMissingParam,
  kTooLarge,
  kDimensionMismatch,
  kInvalidArgument,
  kAllZeroWeights,
  kMixedRegisterSizes,
  kPostselectionImpossible,
  kDegreeTooLarge,
  kShapeMismatch,
  kDataEmpty,
  kSingleClassAuroc,
  kEmptyResults,
  kParseError,
  kSchemaMismatch,
  kRaggedSeries,
  kTooFewPerClass,
  kIoError,
  kConfigError,
  kVersionMismatch,
  kNonFinite,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kMissingParam: return "MissingParam";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kAllZeroWeights: return "AllZeroWeights";
    case ErrorCode::kMixedRegisterSizes: return "MixedRegisterSizes";
    case ErrorCode::kPostselectionImpossible: return "PostselectionImpossible";
    case ErrorCode::kDegreeTooLarge: return "DegreeTooLarge";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDataEmpty: return "DataEmpty";
    case ErrorCode::kSingleClassAuroc: return "SingleClassAUROC";
    case ErrorCode::kEmptyResults: return "EmptyResults";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kRaggedSeries: return "RaggedSeries";
    case ErrorCode::kTooFewPerClass: return "TooFewPerClass";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define QTST_REQUIRE(cond, code, msg)            \
  do {                                           \
    if (!(cond)) throw ::qtst::Error((code), (msg)); \
  } while (false)

using Rng = std::mt19937_64;

/// Named random substream derived from one top-level seed. Streams with
/// different names are statistically independent; the same (seed, name)
/// always yields the same sequence.
inline Rng substream(std::uint64_t seed, std::string_view name) {
  // FNV-1a over the name.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h),
                    static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline constexpr double kPi = 3.14159265358979323846;

inline std::size_t ceil_log2(std::size_t n) {
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  return bits;
}

}  // namespace qtst
