#pragma once

#include <stdexcept>
#include <string>

namespace dcftp {

// Base for all library errors; the CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs outside an operation's documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A certificate hypothesis does not hold for the given numbers.
class CertificateError : public Error {
 public:
  using Error::Error;
};

// Caller broke a precondition of a coupling step (e.g. V(x) > z).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Write-once randomness slot was about to be overwritten.
class LedgerConflict : public Error {
 public:
  using Error::Error;
};

class NoCoalescence : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed or schema-violating run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dcftp
