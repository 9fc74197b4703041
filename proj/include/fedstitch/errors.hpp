// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fedstitch {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input carries no usable variation (constant columns, too few rows).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// A structural specification (split spec, zoo or task config) is malformed.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Operation not permitted in the object's current lifecycle state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Block pool precondition violated: block not alive, or pool empty.
class PoolError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration; field() names the offending key path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace fedstitch
