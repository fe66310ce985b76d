#pragma once

#include <stdexcept>
#include <string>

namespace skilltrace {

// Error taxonomy shared across the library. The CLI maps kinds onto its
// exit-code contract: Io -> 1, Numerical/Infeasible -> 3, everything else -> 2.
enum class ErrorKind {
  Io,
  Validation,
  Shape,
  Ordering,
  Lookup,
  Domain,
  InsufficientData,
  UndefinedMetric,
  Model,
  Infeasible,
  Numerical,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace skilltrace
