#pragma once

#include <stdexcept>
#include <string>

namespace mbbn {

// Every failure surfaced by the library derives from Error, so callers that
// only care about "did it work" can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DecompositionError : public Error {
 public:
  using Error::Error;
};

class StageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A built-in cross-check failed: a kernel disagreed with its oracle or two
/// stages of one model disagreed.
class CheckError : public Error {
 public:
  using Error::Error;
};

}  // namespace mbbn
