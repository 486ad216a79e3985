// Copyright 2026 The icegraph Authors
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

namespace icegraph {

/// Malformed input text. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a data invariant (duplicate ids, unknown DOMs, ...).
class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
  using std::domain_error::domain_error;
};

/// Inconsistent matrix shapes.
class DimensionError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Invalid configuration value.
class ConfigError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Non-finite values during optimization.
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace icegraph
