// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace mgdm {

// Exit codes used by the command-line front end.
enum class ExitCode : int { kOk = 0, kFailure = 1, kInput = 2, kFormat = 3 };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const { return ExitCode::kFailure; }
};

// Bad argument values, shape mismatches, out-of-range steps.
class InputError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kInput; }
};

// Inconsistent configuration (non-divisible geometry, width mismatch, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kInput; }
};

// Malformed, truncated or incompatible files.
class FormatError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kFormat; }
};

class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kInput; }
};

}  // namespace mgdm
