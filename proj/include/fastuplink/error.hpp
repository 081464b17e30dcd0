#pragma once

#include <stdexcept>
#include <string>

namespace fastuplink {

/// Violated precondition: dimension mismatch, out-of-range probability or index.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Stationary distribution requested for an event with eps0 + eps1 == 0.
class UndefinedSteadyState : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Every joint state assigns zero likelihood to the observed activations.
class InconsistentObservation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact computation requested beyond the supported problem size.
class CapabilityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Invalid experiment configuration. The message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace fastuplink
