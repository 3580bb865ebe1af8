#pragma once

#include <stdexcept>
#include <string>

namespace cmest {

/// Argument outside the mathematical domain of an operation (theta outside
/// the parameter space, x outside the support, k <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative method (quadrature, continued fraction, root search) failed
/// to reach the requested accuracy.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double achieved_error)
      : std::runtime_error(what), achieved_error_(achieved_error) {}

  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double achieved_error_;
};

/// Malformed model / q / transform descriptor string.
class ParseError : public std::invalid_argument {
 public:
  ParseError(const std::string& what, std::string key)
      : std::invalid_argument(what), key_(std::move(key)) {}

  /// The offending key (or token) in the descriptor.
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace cmest
