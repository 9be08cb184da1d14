#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string_view>

#include "gsgd/errors.hpp"

namespace gsgd {

// Tolerance tiers used across the geometry code.
namespace tol {
inline constexpr double kConstraint = 1e-10;  // residual of produced points
inline constexpr double kMetric = 1e-8;       // metric identities / diagnostics
inline constexpr double kValidation = 1e-6;   // accepting externally supplied points
inline constexpr double kGram = 1e-12;        // minimal Gram determinant of a 2-plane
}  // namespace tol

enum class ManifoldKind { Euclidean, Sphere, Oblique, Stiefel };

std::string_view to_string(ManifoldKind kind);
ManifoldKind manifold_kind_from_string(std::string_view name);

/// One component submanifold embedded in the ambient space of an
/// `rows x cols` kernel matrix.
///
/// Constraints by kind:
///   Euclidean  unconstrained
///   Sphere     unit Frobenius norm, requires rows*cols >= 2
///   Oblique    unit-norm columns
///   Stiefel    orthonormal columns, requires rows >= cols
struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::Euclidean;
  Eigen::Index rows = 1;
  Eigen::Index cols = 1;
  // Upper bound on the sectional curvatures, used by the optimizer's
  // adaptive step size. Sphere/Oblique 1, Euclidean 0. No closed-form
  // bound is available for Stiefel; it is configurable and defaults to 1.
  double curvature_upper_bound = 0.0;

  static ManifoldSpec euclidean(Eigen::Index rows, Eigen::Index cols);
  static ManifoldSpec sphere(Eigen::Index rows, Eigen::Index cols);
  static ManifoldSpec oblique(Eigen::Index rows, Eigen::Index cols);
  static ManifoldSpec stiefel(Eigen::Index rows, Eigen::Index cols,
                              double curvature_upper_bound = 1.0);
  static ManifoldSpec make(ManifoldKind kind, Eigen::Index rows, Eigen::Index cols);

  Eigen::Index ambient_dim() const { return rows * cols; }
  Eigen::Index intrinsic_dim() const;

  friend bool operator==(const ManifoldSpec& a, const ManifoldSpec& b) {
    return a.kind == b.kind && a.rows == b.rows && a.cols == b.cols;
  }
};

/// A point on a manifold, stored as the full rows x cols ambient matrix.
/// When a flat vector view is needed the matrix is read row-major.
struct Point {
  Eigen::MatrixXd values;
};

/// A tangent vector together with the point it is attached to.
struct TangentVector {
  Eigen::MatrixXd values;
  Point base;
};

/// Distance of `p` from the constraint surface:
/// Sphere |norm-1|, Oblique max column |norm-1|, Stiefel max |p^T p - I|,
/// Euclidean 0.
double constraint_residual(const ManifoldSpec& spec, const Point& p);

/// Orthogonal projection of an ambient matrix onto the tangent space at `p`.
/// Throws InvalidPoint if `p` is off-manifold beyond tol::kValidation and
/// ShapeError on dimension mismatch.
TangentVector tangent_project(const ManifoldSpec& spec, const Point& p,
                              const Eigen::MatrixXd& ambient);

/// First-order retraction of the tangent step `v` at `p`:
/// Sphere/Oblique renormalize, Stiefel takes the Q factor of the thin QR of
/// p+v (R diagonal kept non-negative so the result is unique), Euclidean adds.
/// An exactly zero `v` returns `p` bitwise.
Point retract(const ManifoldSpec& spec, const Point& p, const TangentVector& v);

/// Exponential map. Defined for Euclidean, Sphere and Oblique; Stiefel
/// throws Unsupported (use the QR retraction instead).
Point exp_map(const ManifoldSpec& spec, const Point& p, const TangentVector& v);

/// Riemannian metric: the Frobenius inner product induced by the embedding.
double inner(const ManifoldSpec& spec, const Point& p, const TangentVector& u,
             const TangentVector& v);

/// Geodesic distance. Sphere arc length, Oblique root-sum-square of per
/// column arc lengths, Euclidean Frobenius distance. For Stiefel this
/// returns the chordal (Frobenius) distance, a diagnostic surrogate only.
double geodesic_distance(const ManifoldSpec& spec, const Point& x, const Point& y);

/// Deterministic on-manifold sample for the given seed.
Point random_point(const ManifoldSpec& spec, std::uint64_t seed);
Point random_point(const ManifoldSpec& spec, std::mt19937_64& rng);

/// Gaussian ambient draw projected onto the tangent space at `p`.
TangentVector random_tangent(const ManifoldSpec& spec, const Point& p,
                             std::mt19937_64& rng);

/// Nearest-point style projection of an arbitrary ambient matrix onto the
/// manifold (normalization / thin-QR orthonormalization). Idempotent.
/// Throws DegenerateInput when no well-defined projection exists.
Point project_to_manifold(const ManifoldSpec& spec, const Eigen::MatrixXd& ambient);

namespace detail {

// Unchecked kernels operating on raw matrices; callers validate.
double residual(const ManifoldSpec& spec, const Eigen::MatrixXd& p);
Eigen::MatrixXd project_tangent(const ManifoldSpec& spec, const Eigen::MatrixXd& p,
                                const Eigen::MatrixXd& ambient);
Eigen::MatrixXd retract(const ManifoldSpec& spec, const Eigen::MatrixXd& p,
                        const Eigen::MatrixXd& v);
Eigen::MatrixXd exp_map(const ManifoldSpec& spec, const Eigen::MatrixXd& p,
                        const Eigen::MatrixXd& v);

// Thin QR orthonormalization with non-negative R diagonal. Returns false on
// rank deficiency.
bool qr_orthonormal(const Eigen::MatrixXd& m, Eigen::MatrixXd& q);

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols,
                                std::mt19937_64& rng);

}  // namespace detail

}  // namespace gsgd
