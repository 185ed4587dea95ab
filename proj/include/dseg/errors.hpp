#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dseg {

// Root of every error the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value violates a structural invariant (boundary out of range, bad shape).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Input bytes could not be parsed. `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line = 0)
      : Error(line ? message + " (line " + std::to_string(line) + ")" : message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Raw boundary list could not be normalized; keeps the payload for logging.
class NormalizationError : public ValidationError {
 public:
  NormalizationError(const std::string& message, std::string raw)
      : ValidationError(message), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A segment has no labeled utterance to build a distribution from.
class UndefinedDistribution : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dseg
