#pragma once

#include <stdexcept>
#include <string>

namespace kz {

// Raised for interval domain violations (division through zero, sqrt of a
// negative range) and for state-dimension mismatches.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid or inconsistent user-supplied configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Linear-algebra failures (singular systems, failed factorizations).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double last_time)
      : std::runtime_error(what), last_time_(last_time) {}

  double last_time() const { return last_time_; }

 private:
  double last_time_;
};

// The stability argument cannot be carried out (e.g. a non-Hurwitz
// linearization, or no certifiable quadratic basin).
class CertificationImpossible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kz
