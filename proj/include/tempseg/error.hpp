#pragma once

#include <stdexcept>
#include <string>

namespace tempseg {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad parameter or configuration value (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable, unwritable or malformed file (CLI exit code 3).
class IoError : public Error {
 public:
  using Error::Error;
};

// Numeric data that violates a type invariant, e.g. non-finite logits
// or probability rows that do not sum to one (CLI exit code 3).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between tensors, frames or masks (CLI exit code 4).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Sequences that should line up one-to-one but do not (CLI exit code 5).
class AlignmentError : public Error {
 public:
  using Error::Error;
};

}  // namespace tempseg
