#pragma once

#include <stdexcept>
#include <string>

namespace pcdan {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A required file or directory does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Malformed text or binary record; the message carries the line or byte offset.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input whose values violate a domain invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Incompatible dimensions or parameters between components.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Weights file with bad magic, truncated payload or broken layer chain.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Ground-truth identities missing where training or evaluation needs them.
class LabelError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Internal bookkeeping contradiction, e.g. a detection slot claimed twice.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace pcdan
