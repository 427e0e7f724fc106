#pragma once

#include <stdexcept>
#include <string>

namespace l4dict {

// Base class for every domain error raised by the library. The CLI maps
// these to exit code 1; anything else is a usage error or a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

class NotOrthogonal : public Error {
 public:
  using Error::Error;
};

// Iterative SVD exceeded its rotation budget.
class NonConvergence : public Error {
 public:
  using Error::Error;
};

// Polar factor or inverse square root requested for a (numerically)
// singular matrix.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace l4dict
