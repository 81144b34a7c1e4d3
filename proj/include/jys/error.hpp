#pragma once

#include <stdexcept>
#include <string>

namespace jys {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the documented domain of an operation (bad time, token out of range, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input that is structurally valid but degenerate for the requested quantity.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Operations whose failure is a property of the numbers, not of the call site.
/// The CLI maps this family to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// KL(p || q) with q(x) = 0 where p(x) > 0, or a rate ratio with a zero denominator.
class SupportMismatchError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A query state with zero probability under the marginal q_t.
class ZeroSupportError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IntervalError : public DomainError {
 public:
  using DomainError::DomainError;
};

class UnsupportedFamilyError : public DomainError {
 public:
  using DomainError::DomainError;
};

class BoundViolationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SearchError : public NumericalError {
 public:
  SearchError(const std::string& what, double at) : NumericalError(what), at_(at) {}
  /// The abscissa at which the objective misbehaved.
  double at() const noexcept { return at_; }

 private:
  double at_;
};

class IntegrationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace jys
