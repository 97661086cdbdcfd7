#pragma once

#include <stdexcept>
#include <string>

namespace nsn {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad magic, bad version).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Truncated input; the message states expected vs actual byte counts.
class LengthError : public Error {
 public:
  using Error::Error;
};

class ValueError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Internal state does not line up (tied shapes differ, cache built from other params, ...).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// A loss became non-finite during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nsn
