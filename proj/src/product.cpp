#include "gsgd/product.hpp"

#include <algorithm>
#include <sstream>

namespace gsgd {

namespace {

using RowMajorMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>;
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;

void check_flat(const ProductManifold& M, const Eigen::VectorXd& flat,
                const char* what) {
  if (flat.size() != M.total_ambient_dim()) {
    std::ostringstream msg;
    msg << what << ": flat vector has length " << flat.size() << ", layout needs "
        << M.total_ambient_dim();
    throw ShapeError(msg.str());
  }
}

void check_point(const ProductManifold& M, const ProductPoint& p,
                 const char* what) {
  check_flat(M, p.values, what);
  for (std::size_t i = 0; i < M.num_components(); ++i) {
    const double r = detail::residual(M.components()[i], M.slice(p.values, i));
    if (r > tol::kValidation) {
      std::ostringstream msg;
      msg << what << ": component " << i << " ("
          << to_string(M.components()[i].kind) << ") violates its constraint"
          << " (residual " << r << ")";
      throw InvalidPoint(msg.str());
    }
  }
}

void check_based(const ProductManifold& M, const ProductPoint& p,
                 const ProductTangent& v, const char* what) {
  check_flat(M, v.values, what);
  if (v.base.size() != p.values.size() ||
      (v.base - p.values).cwiseAbs().maxCoeff() > 1e-12) {
    throw BaseMismatch(std::string(what) +
                       ": tangent is attached to a different product point");
  }
}

// Constant-curvature-1 tensor on a sphere slice.
double sphere_tensor(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                     const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  return u.dot(x) * v.dot(y) - u.dot(y) * v.dot(x);
}

}  // namespace

ProductManifold::ProductManifold(std::vector<ManifoldSpec> components)
    : components_(std::move(components)) {
  if (components_.empty()) {
    throw EmptyProduct("a product manifold needs at least one component");
  }
  offsets_.reserve(components_.size());
  for (const auto& spec : components_) {
    offsets_.push_back(total_);
    total_ += spec.ambient_dim();
  }
}

Eigen::MatrixXd ProductManifold::slice(const Eigen::VectorXd& flat,
                                       std::size_t i) const {
  check_flat(*this, flat, "slice");
  const auto& spec = components_[i];
  return ConstRowMajorMap(flat.data() + offsets_[i], spec.rows, spec.cols);
}

void ProductManifold::set_slice(Eigen::VectorXd& flat, std::size_t i,
                                const Eigen::MatrixXd& m) const {
  check_flat(*this, flat, "set_slice");
  const auto& spec = components_[i];
  if (m.rows() != spec.rows || m.cols() != spec.cols) {
    throw ShapeError("set_slice: kernel shape does not match the component");
  }
  RowMajorMap(flat.data() + offsets_[i], spec.rows, spec.cols) = m;
}

double product_constraint_residual(const ProductManifold& M,
                                   const ProductPoint& p) {
  check_flat(M, p.values, "product_constraint_residual");
  double worst = 0.0;
  for (std::size_t i = 0; i < M.num_components(); ++i) {
    worst =
        std::max(worst, detail::residual(M.components()[i], M.slice(p.values, i)));
  }
  return worst;
}

double product_inner(const ProductManifold& M, const ProductPoint& p,
                     const ProductTangent& u, const ProductTangent& v) {
  check_flat(M, p.values, "product_inner");
  check_based(M, p, u, "product_inner(u)");
  check_based(M, p, v, "product_inner(v)");
  // Eq. prod_metric: the product metric is the sum of component metrics, and
  // every component metric is the Frobenius pairing of the slice.
  return u.values.dot(v.values);
}

ProductTangent product_tangent_project(const ProductManifold& M,
                                       const ProductPoint& p,
                                       const Eigen::VectorXd& ambient) {
  check_point(M, p, "product_tangent_project");
  check_flat(M, ambient, "product_tangent_project(ambient)");
  Eigen::VectorXd out(M.total_ambient_dim());
  for (std::size_t i = 0; i < M.num_components(); ++i) {
    M.set_slice(out, i,
                detail::project_tangent(M.components()[i], M.slice(p.values, i),
                                        M.slice(ambient, i)));
  }
  return {std::move(out), p.values};
}

ProductPoint product_retract(const ProductManifold& M, const ProductPoint& p,
                             const ProductTangent& v) {
  check_point(M, p, "product_retract");
  check_based(M, p, v, "product_retract");
  Eigen::VectorXd out(M.total_ambient_dim());
  for (std::size_t i = 0; i < M.num_components(); ++i) {
    try {
      M.set_slice(out, i,
                  detail::retract(M.components()[i], M.slice(p.values, i),
                                  M.slice(v.values, i)));
    } catch (const DegenerateRetraction& e) {
      throw DegenerateRetraction("component " + std::to_string(i) + ": " +
                                 e.what());
    }
  }
  return {std::move(out)};
}

double product_grad_norm(const ProductManifold& M, const ProductTangent& g) {
  check_flat(M, g.values, "product_grad_norm");
  return g.values.norm();
}

double curvature_tensor_eval(const ProductManifold& M, const ProductPoint& p,
                             const ProductTangent& u, const ProductTangent& v,
                             const ProductTangent& x, const ProductTangent& y) {
  check_flat(M, p.values, "curvature_tensor_eval");
  check_based(M, p, u, "curvature_tensor_eval(u)");
  check_based(M, p, v, "curvature_tensor_eval(v)");
  check_based(M, p, x, "curvature_tensor_eval(x)");
  check_based(M, p, y, "curvature_tensor_eval(y)");
  double total = 0.0;
  for (std::size_t i = 0; i < M.num_components(); ++i) {
    const auto& spec = M.components()[i];
    switch (spec.kind) {
      case ManifoldKind::Euclidean:
        break;  // flat slice contributes nothing
      case ManifoldKind::Sphere: {
        const Eigen::Index off = M.offsets()[i];
        const Eigen::Index n = spec.ambient_dim();
        total += sphere_tensor(u.values.segment(off, n), v.values.segment(off, n),
                               x.values.segment(off, n), y.values.segment(off, n));
        break;
      }
      case ManifoldKind::Oblique: {
        // Each column is an independent unit sphere.
        Eigen::MatrixXd us = M.slice(u.values, i), vs = M.slice(v.values, i);
        Eigen::MatrixXd xs = M.slice(x.values, i), ys = M.slice(y.values, i);
        for (Eigen::Index j = 0; j < spec.cols; ++j) {
          total += sphere_tensor(us.col(j), vs.col(j), xs.col(j), ys.col(j));
        }
        break;
      }
      case ManifoldKind::Stiefel:
        throw Unsupported(
            "curvature_tensor_eval: no closed form for Stiefel components; "
            "use product_curvature_upper_bound");
    }
  }
  return total;
}

double sectional_curvature(const ProductManifold& M, const ProductPoint& p,
                           const ProductTangent& u, const ProductTangent& v) {
  const double uu = product_inner(M, p, u, u);
  const double vv = product_inner(M, p, v, v);
  const double uv = product_inner(M, p, u, v);
  const double gram = uu * vv - uv * uv;
  if (gram <= tol::kGram) {
    throw DegeneratePlane(
        "sectional_curvature: plane is degenerate (Gram determinant " +
        std::to_string(gram) + ")");
  }
  return curvature_tensor_eval(M, p, u, v, u, v) / gram;
}

double product_curvature_upper_bound(const ProductManifold& M) {
  double bound = 0.0;
  for (const auto& spec : M.components()) {
    bound = std::max(bound, spec.curvature_upper_bound);
  }
  return bound;
}

ProductPoint product_random_point(const ProductManifold& M,
                                  std::mt19937_64& rng) {
  Eigen::VectorXd out(M.total_ambient_dim());
  for (std::size_t i = 0; i < M.num_components(); ++i) {
    M.set_slice(out, i, random_point(M.components()[i], rng).values);
  }
  return {std::move(out)};
}

ProductPoint product_random_point(const ProductManifold& M, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return product_random_point(M, rng);
}

ProductTangent product_random_tangent(const ProductManifold& M,
                                      const ProductPoint& p,
                                      std::mt19937_64& rng) {
  Eigen::VectorXd g(M.total_ambient_dim());
  for (std::size_t i = 0; i < M.num_components(); ++i) {
    const auto& spec = M.components()[i];
    M.set_slice(g, i, detail::standard_normal(spec.rows, spec.cols, rng));
  }
  return product_tangent_project(M, p, g);
}

}  // namespace gsgd
