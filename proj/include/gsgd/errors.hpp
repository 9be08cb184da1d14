#pragma once

#include <stdexcept>
#include <string>

namespace gsgd {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or vector dimensions do not match the expected layout.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A point violates its manifold constraint beyond the validation tolerance.
class InvalidPoint : public Error {
 public:
  using Error::Error;
};

/// Tangent vectors were combined at different base points.
class BaseMismatch : public Error {
 public:
  using Error::Error;
};

/// The retraction argument is degenerate (zero norm column, rank-deficient
/// matrix) and no point on the manifold can be produced.
class DegenerateRetraction : public Error {
 public:
  using Error::Error;
};

/// Input to a manifold projection is degenerate for the requested kind.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// The two tangent vectors do not span a 2-plane (Gram determinant ~ 0).
class DegeneratePlane : public Error {
 public:
  using Error::Error;
};

/// Operation is not defined for the requested manifold kind.
class Unsupported : public Error {
 public:
  using Error::Error;
};

/// A product manifold needs at least one component.
class EmptyProduct : public Error {
 public:
  using Error::Error;
};

/// Index subsets fail to partition the requested range.
class InvalidPartition : public Error {
 public:
  using Error::Error;
};

/// More subsets requested than elements available.
class TooManyGroups : public Error {
 public:
  using Error::Error;
};

/// A gradient contained NaN or infinity; optimizer state is left unchanged.
class NonFiniteGradient : public Error {
 public:
  NonFiniteGradient(const std::string& what, long iteration)
      : Error(what), iteration_(iteration) {}
  explicit NonFiniteGradient(const std::string& what) : Error(what) {}

  /// Iteration at which the non-finite value was observed, -1 if unknown.
  long iteration() const { return iteration_; }

 private:
  long iteration_ = -1;
};

/// Experiment configuration failed to parse or validate.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint file is corrupt, truncated, or has an unsupported version.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace gsgd
