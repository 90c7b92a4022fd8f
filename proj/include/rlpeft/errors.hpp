// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace rlpeft {

// Process exit codes used by the CLI. Every library error maps to one.
enum class ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kNumeric = 3,
  kFormat = 4,
  kMismatch = 5,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::kFailure)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension error: " + what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error("contract error: " + what) {}
};

class UnsupportedKindError : public Error {
 public:
  explicit UnsupportedKindError(const std::string& what) : Error("unsupported kind: " + what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error("config error: " + what, ExitCode::kConfig) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error("numeric error: " + what, ExitCode::kNumeric) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what)
      : Error("format error: " + what, ExitCode::kFormat) {}
};

class MismatchError : public Error {
 public:
  explicit MismatchError(const std::string& what)
      : Error("architecture mismatch: " + what, ExitCode::kMismatch) {}
};

}  // namespace rlpeft
