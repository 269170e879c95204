#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace recf {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: malformed files, out-of-range ids, inconsistent shapes.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A file line that could not be parsed. Carries the 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Matrix shapes that do not agree with each other or with the data.
class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

/// No token survived the min-count filter, or the corpus was empty.
class EmptyVocabularyError : public DataError {
 public:
  using DataError::DataError;
};

/// A normal-equations system with zero ridge turned out to be singular.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace recf
