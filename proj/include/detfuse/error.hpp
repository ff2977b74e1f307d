// Copyright 2026 The detfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace detfuse {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invalid input data (bad boxes, NaN scores, unparsable files).
class InputError : public Error {
 public:
  using Error::Error;
};

class InvalidScoreError : public InputError {
 public:
  using InputError::InputError;
};

/// A record in a line-oriented file failed to parse.
class ParseError : public InputError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : InputError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Inconsistent or unsupported configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingVarianceError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class EmptyClusterError : public Error {
 public:
  using Error::Error;
};

class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

}  // namespace detfuse
