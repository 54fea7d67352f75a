#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace homnet {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input row. line() is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateError : public ParseError {
 public:
  using ParseError::ParseError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InsufficientPopulationError : public Error {
 public:
  using Error::Error;
};

class NearCompleteGraphError : public Error {
 public:
  using Error::Error;
};

class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

// Information matrix is singular even after the ridge term is added.
class IllConditionedError : public Error {
 public:
  IllConditionedError(const std::string& what, std::vector<std::string> columns)
      : Error(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::string> columns_;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace homnet
