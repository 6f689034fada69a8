#pragma once

#include <stdexcept>
#include <string>

namespace stfv {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A flux or entropy component evaluated to a non-finite value.
class EvaluationError : public Error {
 public:
  EvaluationError(int alpha, const std::string& where, const std::string& what)
      : Error(what), alpha_(alpha), where_(where) {}
  int alpha() const { return alpha_; }
  const std::string& where() const { return where_; }

 private:
  int alpha_;
  std::string where_;
};

/// Face measure |e| is not positive.
class DegenerateFaceError : public Error {
 public:
  using Error::Error;
};

/// No bracket for the averaged-flux inversion inside the widened state range.
class InversionRangeError : public Error {
 public:
  using Error::Error;
};

/// Iterative solve did not reach its tolerance within the iteration cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class MeshError : public Error {
 public:
  using Error::Error;
};

/// Time step violates the CFL restriction.
class CflError : public Error {
 public:
  CflError(const std::string& what, double margin) : Error(what), margin_(margin) {}
  double margin() const { return margin_; }

 private:
  double margin_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Query outside the domain of a function (point outside M, post-shock oracle, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace stfv
