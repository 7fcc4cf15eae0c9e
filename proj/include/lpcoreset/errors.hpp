#pragma once

#include <stdexcept>
#include <string>

namespace lpcoreset {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AllZeroMatrix : public Error {
 public:
  AllZeroMatrix() : Error("matrix has no nonzero entry") {}
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class Overflow : public Error {
 public:
  using Error::Error;
};

class UnsupportedExponent : public Error {
 public:
  explicit UnsupportedExponent(double p)
      : Error("unsupported exponent p = " + std::to_string(p)), p_(p) {}
  double p() const noexcept { return p_; }

 private:
  double p_;
};

class ExponentOutOfRange : public Error {
 public:
  ExponentOutOfRange(double p, const std::string& range)
      : Error("exponent p = " + std::to_string(p) + " outside " + range), p_(p) {}
  double p() const noexcept { return p_; }

 private:
  double p_;
};

/// Iterative solver hit its iteration cap. Carries the best objective seen.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, double best_value, double residual,
                long row = -1)
      : Error(what), best_value_(best_value), residual_(residual), row_(row) {}
  double best_value() const noexcept { return best_value_; }
  double residual() const noexcept { return residual_; }
  long row() const noexcept { return row_; }

 private:
  double best_value_;
  double residual_;
  long row_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lpcoreset
