// Copyright 2026 The sparsesep Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace sparsesep {

enum class ErrorKind {
  kFormat,
  kChannelCount,
  kSampleRate,
  kLength,
  kShape,
  kSplit,
  kRepresentation,
  kPhaseRequired,
  kPrecondition,
  kDivergence,
  kData,
  kUsage,
  kDependency,
  kDegenerateSource,
  kAggregation,
  kConfig,
  kIo,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kChannelCount: return "channel-count error";
    case ErrorKind::kSampleRate: return "sample-rate error";
    case ErrorKind::kLength: return "length error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kSplit: return "split error";
    case ErrorKind::kRepresentation: return "representation error";
    case ErrorKind::kPhaseRequired: return "phase-required error";
    case ErrorKind::kPrecondition: return "precondition error";
    case ErrorKind::kDivergence: return "divergence error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kUsage: return "usage error";
    case ErrorKind::kDependency: return "dependency error";
    case ErrorKind::kDegenerateSource: return "degenerate-source error";
    case ErrorKind::kAggregation: return "aggregation error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

/// Every failure raised by the library carries a kind so callers (and the
/// CLI exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace sparsesep
