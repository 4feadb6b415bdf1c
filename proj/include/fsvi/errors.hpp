#pragma once

#include <stdexcept>
#include <string>

namespace fsvi {

// Base class so callers can catch any library failure in one place.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failures (exit code 2 at the CLI).
class FactorizationFailed : public Error {
 public:
  using Error::Error;
};

// Contract violations and bad inputs (exit code 1 at the CLI).
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class PolicyViolation : public Error {
 public:
  using Error::Error;
};

class EmptyData : public Error {
 public:
  using Error::Error;
};

class EmptyPool : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class EmptyRetainedSet : public Error {
 public:
  using Error::Error;
};

class InvalidFractions : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class RaggedRows : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace fsvi
