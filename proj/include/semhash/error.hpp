#pragma once

#include <stdexcept>
#include <string>

namespace semhash {

// Error categories map one-to-one onto CLI exit codes (see cli.hpp).

/// Bad arguments or configuration supplied by the caller.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed, truncated, or inconsistent data (files or in-memory values).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file did not match its binary layout (magic, version, size, padding).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// The filesystem refused an open/read/write.
class IoError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite or undefined quantity encountered during computation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace semhash
