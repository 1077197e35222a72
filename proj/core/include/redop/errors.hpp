#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace redop {

// Root of the library's error hierarchy. Every throwing path in the engine
// uses one of these types so callers can distinguish input problems from
// mathematical obstructions (singular operators, exponent collisions) and
// from numeric failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Expression-string does not conform to the grammar.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t position)
      : Error(what + " (at position " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Identifier not registered as a variable, parameter, jet, or function.
class UnknownSymbolError : public Error {
 public:
  using Error::Error;
};

// Numeric evaluation left the admissible domain (negative base with
// fractional exponent, vanishing denominator, pole on an integration path).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Substitution bindings form a cycle.
class CyclicBindingError : public Error {
 public:
  using Error::Error;
};

// Expression is not polynomial in the requested collection basis.
class NotPolynomialError : public Error {
 public:
  using Error::Error;
};

// The operator is singular for the class equation: f·ξ² − uⁿ ≡ 0, so the
// second-order elimination fails and the singular pipeline must be used.
class SingularOperatorError : public Error {
 public:
  using Error::Error;
};

// A parameter specialization makes two generically distinct exponent classes
// coincide; the caller must re-derive with merged coefficients.
class ExponentCollisionError : public Error {
 public:
  using Error::Error;
};

// Classified-case constructor preconditions violated.
class ConstraintViolationError : public Error {
 public:
  using Error::Error;
};

// Operation not available for the requested case id.
class UnsupportedCaseError : public Error {
 public:
  using Error::Error;
};

// Iterative numeric scheme failed to reach tolerance.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace redop
