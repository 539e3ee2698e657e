#pragma once

#include <stdexcept>
#include <string>

namespace doe {

// Base class for all errors raised by the library. Subclasses exist where
// callers are expected to branch on the failure mode; everything else is
// reported through the base with a message.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class CycleDetected : public TopologyError {
 public:
  using TopologyError::TopologyError;
};

class DisconnectedBus : public TopologyError {
 public:
  using TopologyError::TopologyError;
};

class DuplicateEdge : public TopologyError {
 public:
  using TopologyError::TopologyError;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, int iterations, double residual)
      : Error(what), iterations(iterations), residual(residual) {}
  int iterations;
  double residual;
};

class NegativeVoltageSquare : public Error {
 public:
  using Error::Error;
};

class MalformedFile : public Error {
 public:
  using Error::Error;
};

class FingerprintMismatch : public Error {
 public:
  using Error::Error;
};

class TooManyRejections : public Error {
 public:
  using Error::Error;
};

class EmptySplit : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class DivergedLoss : public TrainingError {
 public:
  using TrainingError::TrainingError;
};

class SolverFailure : public Error {
 public:
  using Error::Error;
};

class NumericalBreakdown : public SolverFailure {
 public:
  using SolverFailure::SolverFailure;
};

class NoIncumbentFound : public SolverFailure {
 public:
  NoIncumbentFound(const std::string& what, double bound)
      : SolverFailure(what), bound(bound) {}
  double bound;
};

class UnboundedInput : public Error {
 public:
  using Error::Error;
};

class BuildError : public Error {
 public:
  using Error::Error;
};

}  // namespace doe
