#pragma once

#include <stdexcept>
#include <string>

namespace subspace {

// Operand shapes do not fit the operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input values outside the operation's domain (non-finite entries, degenerate norms).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A tuner or regularizer kind that the operation does not support.
class UnsupportedKind : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int step, const std::string& what)
      : std::runtime_error("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace subspace
