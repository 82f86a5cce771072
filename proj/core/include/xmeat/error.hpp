#pragma once

#include <stdexcept>
#include <string>

namespace xmeat {

// Base for every failure raised by the toolkit. Messages start with a short
// stable phrase ("invalid bundle", "lexicon too small", ...) that callers and
// tests may match on.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input files or directories that fail validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Numerically degenerate input (zero-norm vectors, constant columns).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace xmeat
