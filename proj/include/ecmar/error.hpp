#pragma once

#include <stdexcept>
#include <string>

namespace ecmar {

// Base of every error thrown by the library. The CLI maps the three
// subclasses onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration, bad arguments, violated preconditions on user input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent data files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Near-singular moments, failed decompositions, infeasible designs.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ecmar
