#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace lureid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// An eigen/factorization routine failed. Carries the matrix dimension.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, Eigen::Index dim) : Error(what), dim_(dim) {}
  Eigen::Index dim() const noexcept { return dim_; }

 private:
  Eigen::Index dim_;
};

class NotPsdError : public Error {
 public:
  NotPsdError(const std::string& what, double eigenvalue) : Error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

/// Normal matrix of the affine closed-form solve is singular.
class IdentifiabilityError : public Error {
 public:
  IdentifiabilityError(const std::string& what, Eigen::VectorXd null_direction)
      : Error(what), null_direction_(std::move(null_direction)) {}
  const Eigen::VectorXd& null_direction() const noexcept { return null_direction_; }

 private:
  Eigen::VectorXd null_direction_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, Eigen::VectorXd best)
      : Error(what), best_(std::move(best)) {}
  const Eigen::VectorXd& best_iterate() const noexcept { return best_; }

 private:
  Eigen::VectorXd best_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace lureid
