#pragma once

#include <stdexcept>
#include <string>

namespace lrvar {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the operation's domain (bad rank, dimension mismatch...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// An iterative routine failed or produced non-finite values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Transition matrix is not a strict contraction where one is required.
class ContractionError : public Error {
 public:
  using Error::Error;
};

class SampleTooSmallError : public Error {
 public:
  SampleTooSmallError(const std::string& what, long minimal_length)
      : Error(what), minimal_length_(minimal_length) {}
  long minimal_length() const noexcept { return minimal_length_; }

 private:
  long minimal_length_;
};

class UnsupportedLossError : public Error {
 public:
  using Error::Error;
};

// Rank path has no rank change, so the slope heuristic cannot pick a jump.
class NoJumpError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace lrvar
