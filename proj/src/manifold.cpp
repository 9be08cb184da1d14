#include "gsgd/manifold.hpp"

#include <cmath>
#include <sstream>

namespace gsgd {

namespace {

void check_shape(const ManifoldSpec& spec, const Eigen::MatrixXd& m,
                 const char* what) {
  if (m.rows() != spec.rows || m.cols() != spec.cols) {
    std::ostringstream msg;
    msg << what << ": expected " << spec.rows << "x" << spec.cols << ", got "
        << m.rows() << "x" << m.cols();
    throw ShapeError(msg.str());
  }
}

void check_point(const ManifoldSpec& spec, const Point& p, const char* what) {
  check_shape(spec, p.values, what);
  const double r = detail::residual(spec, p.values);
  if (r > tol::kValidation) {
    std::ostringstream msg;
    msg << what << ": point violates the " << to_string(spec.kind)
        << " constraint (residual " << r << ")";
    throw InvalidPoint(msg.str());
  }
}

void check_base(const Point& p, const TangentVector& v, const char* what) {
  if (v.base.values.rows() != p.values.rows() ||
      v.base.values.cols() != p.values.cols() ||
      (v.base.values - p.values).cwiseAbs().maxCoeff() > 1e-12) {
    throw BaseMismatch(std::string(what) +
                       ": tangent vector is attached to a different point");
  }
}

constexpr double kDegenerateNorm = 1e-12;

}  // namespace

std::string_view to_string(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::Euclidean: return "Euclidean";
    case ManifoldKind::Sphere: return "Sphere";
    case ManifoldKind::Oblique: return "Oblique";
    case ManifoldKind::Stiefel: return "Stiefel";
  }
  return "?";
}

ManifoldKind manifold_kind_from_string(std::string_view name) {
  if (name == "Euclidean") return ManifoldKind::Euclidean;
  if (name == "Sphere") return ManifoldKind::Sphere;
  if (name == "Oblique") return ManifoldKind::Oblique;
  if (name == "Stiefel") return ManifoldKind::Stiefel;
  throw Error("unknown manifold kind: " + std::string(name));
}

ManifoldSpec ManifoldSpec::euclidean(Eigen::Index rows, Eigen::Index cols) {
  if (rows < 1 || cols < 1) throw ShapeError("Euclidean: dimensions must be positive");
  return {ManifoldKind::Euclidean, rows, cols, 0.0};
}

ManifoldSpec ManifoldSpec::sphere(Eigen::Index rows, Eigen::Index cols) {
  if (rows < 1 || cols < 1) throw ShapeError("Sphere: dimensions must be positive");
  if (rows * cols < 2) throw ShapeError("Sphere: needs ambient dimension >= 2");
  return {ManifoldKind::Sphere, rows, cols, 1.0};
}

ManifoldSpec ManifoldSpec::oblique(Eigen::Index rows, Eigen::Index cols) {
  if (rows < 1 || cols < 1) throw ShapeError("Oblique: dimensions must be positive");
  return {ManifoldKind::Oblique, rows, cols, 1.0};
}

ManifoldSpec ManifoldSpec::stiefel(Eigen::Index rows, Eigen::Index cols,
                                   double curvature_upper_bound) {
  if (rows < 1 || cols < 1) throw ShapeError("Stiefel: dimensions must be positive");
  if (rows < cols) throw ShapeError("Stiefel: needs rows >= cols");
  return {ManifoldKind::Stiefel, rows, cols, curvature_upper_bound};
}

ManifoldSpec ManifoldSpec::make(ManifoldKind kind, Eigen::Index rows,
                                Eigen::Index cols) {
  switch (kind) {
    case ManifoldKind::Euclidean: return euclidean(rows, cols);
    case ManifoldKind::Sphere: return sphere(rows, cols);
    case ManifoldKind::Oblique: return oblique(rows, cols);
    case ManifoldKind::Stiefel: return stiefel(rows, cols);
  }
  throw Error("unknown manifold kind");
}

Eigen::Index ManifoldSpec::intrinsic_dim() const {
  switch (kind) {
    case ManifoldKind::Euclidean: return rows * cols;
    case ManifoldKind::Sphere: return rows * cols - 1;
    case ManifoldKind::Oblique: return cols * (rows - 1);
    case ManifoldKind::Stiefel: return rows * cols - cols * (cols + 1) / 2;
  }
  return 0;
}

namespace detail {

double residual(const ManifoldSpec& spec, const Eigen::MatrixXd& p) {
  switch (spec.kind) {
    case ManifoldKind::Euclidean:
      return 0.0;
    case ManifoldKind::Sphere:
      return std::abs(p.norm() - 1.0);
    case ManifoldKind::Oblique: {
      double worst = 0.0;
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        worst = std::max(worst, std::abs(p.col(j).norm() - 1.0));
      }
      return worst;
    }
    case ManifoldKind::Stiefel: {
      Eigen::MatrixXd gram = p.transpose() * p;
      gram.diagonal().array() -= 1.0;
      return gram.cwiseAbs().maxCoeff();
    }
  }
  return 0.0;
}

Eigen::MatrixXd project_tangent(const ManifoldSpec& spec, const Eigen::MatrixXd& p,
                                const Eigen::MatrixXd& ambient) {
  switch (spec.kind) {
    case ManifoldKind::Euclidean:
      return ambient;
    case ManifoldKind::Sphere:
      return ambient - (ambient.cwiseProduct(p)).sum() * p;
    case ManifoldKind::Oblique: {
      Eigen::MatrixXd t = ambient;
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        t.col(j) -= ambient.col(j).dot(p.col(j)) * p.col(j);
      }
      return t;
    }
    case ManifoldKind::Stiefel: {
      Eigen::MatrixXd ptA = p.transpose() * ambient;
      Eigen::MatrixXd sym = 0.5 * (ptA + ptA.transpose());
      return ambient - p * sym;
    }
  }
  return ambient;
}

bool qr_orthonormal(const Eigen::MatrixXd& m, Eigen::MatrixXd& q) {
  const Eigen::Index n = m.cols();
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (std::abs(qr.matrixQR()(j, j)) <= kDegenerateNorm * scale) return false;
  }
  q = qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (qr.matrixQR()(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return true;
}

Eigen::MatrixXd retract(const ManifoldSpec& spec, const Eigen::MatrixXd& p,
                        const Eigen::MatrixXd& v) {
  // Exact fixed point for a zero step; keeps zero-gradient iterations and
  // checkpoint round trips bitwise stable.
  if (v.isZero(0.0)) return p;
  Eigen::MatrixXd moved = p + v;
  switch (spec.kind) {
    case ManifoldKind::Euclidean:
      return moved;
    case ManifoldKind::Sphere: {
      const double n = moved.norm();
      if (n < kDegenerateNorm) {
        throw DegenerateRetraction("Sphere retraction: p+v has vanishing norm");
      }
      return moved / n;
    }
    case ManifoldKind::Oblique: {
      for (Eigen::Index j = 0; j < moved.cols(); ++j) {
        const double n = moved.col(j).norm();
        if (n < kDegenerateNorm) {
          throw DegenerateRetraction("Oblique retraction: column " +
                                     std::to_string(j) + " has vanishing norm");
        }
        moved.col(j) /= n;
      }
      return moved;
    }
    case ManifoldKind::Stiefel: {
      Eigen::MatrixXd q;
      if (!qr_orthonormal(moved, q)) {
        throw DegenerateRetraction("Stiefel retraction: p+v is rank deficient");
      }
      return q;
    }
  }
  return moved;
}

Eigen::MatrixXd exp_map(const ManifoldSpec& spec, const Eigen::MatrixXd& p,
                        const Eigen::MatrixXd& v) {
  auto sphere_exp = [](const auto& base, const auto& dir) -> Eigen::MatrixXd {
    const double theta = dir.norm();
    if (theta == 0.0) return base;
    return std::cos(theta) * base + (std::sin(theta) / theta) * dir;
  };
  switch (spec.kind) {
    case ManifoldKind::Euclidean:
      return p + v;
    case ManifoldKind::Sphere:
      return sphere_exp(p, v);
    case ManifoldKind::Oblique: {
      Eigen::MatrixXd out(p.rows(), p.cols());
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        out.col(j) = sphere_exp(p.col(j), v.col(j));
      }
      return out;
    }
    case ManifoldKind::Stiefel:
      throw Unsupported("exp_map: not available for Stiefel, use retract");
  }
  return p + v;
}

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols,
                                std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = gauss(rng);
    }
  }
  return m;
}

}  // namespace detail

double constraint_residual(const ManifoldSpec& spec, const Point& p) {
  check_shape(spec, p.values, "constraint_residual");
  return detail::residual(spec, p.values);
}

TangentVector tangent_project(const ManifoldSpec& spec, const Point& p,
                              const Eigen::MatrixXd& ambient) {
  check_point(spec, p, "tangent_project");
  check_shape(spec, ambient, "tangent_project(ambient)");
  return {detail::project_tangent(spec, p.values, ambient), p};
}

Point retract(const ManifoldSpec& spec, const Point& p, const TangentVector& v) {
  check_point(spec, p, "retract");
  check_shape(spec, v.values, "retract(v)");
  check_base(p, v, "retract");
  return {detail::retract(spec, p.values, v.values)};
}

Point exp_map(const ManifoldSpec& spec, const Point& p, const TangentVector& v) {
  check_point(spec, p, "exp_map");
  check_shape(spec, v.values, "exp_map(v)");
  check_base(p, v, "exp_map");
  return {detail::exp_map(spec, p.values, v.values)};
}

double inner(const ManifoldSpec& spec, const Point& p, const TangentVector& u,
             const TangentVector& v) {
  check_shape(spec, u.values, "inner(u)");
  check_shape(spec, v.values, "inner(v)");
  check_base(p, u, "inner");
  check_base(p, v, "inner");
  return (u.values.cwiseProduct(v.values)).sum();
}

double geodesic_distance(const ManifoldSpec& spec, const Point& x, const Point& y) {
  check_point(spec, x, "geodesic_distance");
  check_point(spec, y, "geodesic_distance");
  auto arc = [](double cosine) {
    return std::acos(std::clamp(cosine, -1.0, 1.0));
  };
  switch (spec.kind) {
    case ManifoldKind::Euclidean:
    case ManifoldKind::Stiefel:
      // Stiefel: chordal surrogate, diagnostics only.
      return (x.values - y.values).norm();
    case ManifoldKind::Sphere:
      return arc((x.values.cwiseProduct(y.values)).sum());
    case ManifoldKind::Oblique: {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < spec.cols; ++j) {
        const double a = arc(x.values.col(j).dot(y.values.col(j)));
        sum += a * a;
      }
      return std::sqrt(sum);
    }
  }
  return 0.0;
}

Point random_point(const ManifoldSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_point(spec, rng);
}

Point random_point(const ManifoldSpec& spec, std::mt19937_64& rng) {
  Eigen::MatrixXd g = detail::standard_normal(spec.rows, spec.cols, rng);
  switch (spec.kind) {
    case ManifoldKind::Euclidean:
      return {g / std::sqrt(static_cast<double>(spec.ambient_dim()))};
    case ManifoldKind::Sphere:
    case ManifoldKind::Oblique:
    case ManifoldKind::Stiefel:
      return project_to_manifold(spec, g);
  }
  return {g};
}

TangentVector random_tangent(const ManifoldSpec& spec, const Point& p,
                             std::mt19937_64& rng) {
  return tangent_project(spec, p,
                         detail::standard_normal(spec.rows, spec.cols, rng));
}

Point project_to_manifold(const ManifoldSpec& spec, const Eigen::MatrixXd& ambient) {
  check_shape(spec, ambient, "project_to_manifold");
  switch (spec.kind) {
    case ManifoldKind::Euclidean:
      return {ambient};
    case ManifoldKind::Sphere: {
      const double n = ambient.norm();
      if (n < kDegenerateNorm) {
        throw DegenerateInput("project_to_manifold: ambient matrix has zero norm");
      }
      return {ambient / n};
    }
    case ManifoldKind::Oblique: {
      Eigen::MatrixXd out = ambient;
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double n = out.col(j).norm();
        if (n < kDegenerateNorm) {
          throw DegenerateInput("project_to_manifold: column " + std::to_string(j) +
                                " has zero norm");
        }
        out.col(j) /= n;
      }
      return {out};
    }
    case ManifoldKind::Stiefel: {
      Eigen::MatrixXd q;
      if (!detail::qr_orthonormal(ambient, q)) {
        throw DegenerateInput("project_to_manifold: ambient matrix is rank deficient");
      }
      return {q};
    }
  }
  return {ambient};
}

}  // namespace gsgd
