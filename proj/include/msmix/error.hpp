// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace msmix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A value is outside the domain the operation accepts.
class ValueError : public Error {
public:
  using Error::Error;
};

/// A file or document failed validation. `field()` names the offending entry.
class ParseError : public Error {
public:
  ParseError(std::string field, const std::string &what)
      : Error("parse error at '" + field + "': " + what), field_(std::move(field)) {}

  const std::string &field() const noexcept { return field_; }

private:
  std::string field_;
};

} // namespace msmix
