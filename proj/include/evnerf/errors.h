// Copyright 2026 The evnerf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace evnerf {

// Error taxonomy. The CLI maps these onto exit codes (see tools/evnerf.cc).

/// Invalid argument value (bad name, count, or flag combination).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Index or coordinate outside its valid range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed or non-finite input data. Carries the 1-based line number when
/// the data came from a text file (0 otherwise).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, long line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// Inconsistent configuration (shape mismatch, missing thresholds, unknown key).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse detected at runtime: stale caches, negative densities.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Evaluation cannot be computed (empty mask, degenerate input).
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evnerf
