// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace fairgeo {

// Base for everything thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical / domain failures. CLI maps these to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NotStochastic : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularChannel : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ZeroMassMarginal : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ZeroMassReference : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class AbsoluteContinuityViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ZeroMassOutput : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InvalidPerturbation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonpositiveRate : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoFeasibleDirection : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Reconstructed conditionals left the simplex: epsilon too large for the prior.
class InvalidReconstruction : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class TooManyParameters : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnsupportedCardinality : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Bad user input (config file / flags). CLI maps to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A reference value check failed in the built-in example. CLI maps to exit 2.
class AcceptanceDeviation : public Error {
 public:
  using Error::Error;
};

}  // namespace fairgeo
