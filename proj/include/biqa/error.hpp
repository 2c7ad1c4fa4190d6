// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace biqa {

// Base for every error raised by the library. The CLI maps the subclasses
// onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments (exit code 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Missing assets, malformed files, failed invariants on input data (exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or failed numerical procedures (exit code 3).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace biqa
