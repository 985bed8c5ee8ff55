#pragma once

#include <stdexcept>
#include <string>

namespace peerconf {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, configs, parameter values).
class ParseError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Regressors are rank deficient or a restriction cannot be tested.
class IdentificationError : public Error {
 public:
  using Error::Error;
};

// Parameters fall outside the region where the equilibrium is certified unique.
class CertificateError : public Error {
 public:
  using Error::Error;
};

}  // namespace peerconf
