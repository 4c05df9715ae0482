#pragma once

#include <stdexcept>
#include <string>

namespace lqlift {

/// Base class of every exception thrown by lqlift.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the documented domain of an operation.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Two quadrature resolutions disagree beyond tolerance.
class QuadratureDisagreement : public Error {
 public:
  QuadratureDisagreement(const std::string& what, double coarse, double fine)
      : Error(what), coarse_(coarse), fine_(fine) {}
  double coarse() const noexcept { return coarse_; }
  double fine() const noexcept { return fine_; }

 private:
  double coarse_;
  double fine_;
};

/// A linear-algebra or iterative routine failed to produce a usable answer.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace lqlift
