#pragma once

#include <stdexcept>
#include <string>

namespace dmb {

// Argument outside the domain of an operation (e.g. time outside [0, T]).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed input value: wrong sizes, negative probabilities, bad permutation.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Target mass on a state the source cannot reach (q[i] = 0 < p[i]).
class UnsolvableSupport : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A cumulative prefix in the sorted bridge problem has zero mass.
class DegeneratePrefix : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Internal consistency check failed (negative rate, corrupted matrix).
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite loss, divergence, or another numerical breakdown during training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dmb
