#pragma once

#include <stdexcept>
#include <string>

namespace starspec {

/// Invalid argument or configuration (bad flag, parameter outside its admissible range).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure failed to produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace starspec
