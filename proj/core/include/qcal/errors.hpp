#pragma once

#include <stdexcept>
#include <string>

namespace qcal {

/// Base class for all errors raised by the calibration library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// An input violates a documented precondition (orthonormality, POVM constraints, ranges).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class UnnormalizableState : public Error {
 public:
  using Error::Error;
};

class NotAQuorum : public Error {
 public:
  using Error::Error;
};

class NonInvertibleNoise : public Error {
 public:
  using Error::Error;
};

class KernelConstructionError : public Error {
 public:
  using Error::Error;
};

/// A truncation cutoff leaves more probability mass outside the space than allowed.
class CutoffError : public Error {
 public:
  using Error::Error;
};

class UnsupportedStructure : public Error {
 public:
  using Error::Error;
};

class NumericalValidityError : public Error {
 public:
  using Error::Error;
};

class BootstrapError : public Error {
 public:
  using Error::Error;
};

/// The bipartite input state does not induce an invertible map on the relevant subspace.
class FaithfulnessError : public Error {
 public:
  FaithfulnessError(const std::string& what, double condition_number)
      : Error(what), condition_number_(condition_number) {}
  double condition_number() const noexcept { return condition_number_; }

 private:
  double condition_number_;
};

}  // namespace qcal
