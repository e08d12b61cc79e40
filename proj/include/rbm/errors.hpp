#pragma once

#include <stdexcept>
#include <string>

namespace rbm {

// Argument outside the mathematical domain of an operation (angles out of
// range, points outside the wedge, non-positive lengths).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation requested in a parameter regime where the underlying process
// does not exist or the estimator is meaningless.
class RegimeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller violated a documented precondition.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A test function failed its boundary-derivative certification.
class CertificateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed configuration file or experiment description.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rbm
