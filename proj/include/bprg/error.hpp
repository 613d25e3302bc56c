#pragma once

#include <stdexcept>
#include <string>

namespace bprg {

// Every failure raised by the library derives from Error. The CLI maps the
// categories onto exit codes (usage -> 1, data/format/config -> 2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not compose.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Caller-supplied values are outside the accepted domain (e.g. a label >= class count).
class InputError : public Error {
 public:
  using Error::Error;
};

// The API was driven in a way its contract forbids.
class UsageError : public Error {
 public:
  using Error::Error;
};

// An experiment description or model spec is invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A file on disk is malformed.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared in a tensor.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace bprg
