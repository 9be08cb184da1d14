#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gsgd/manifold.hpp"

namespace gsgd {

// Cartesian product of kernel submanifolds (a PEM). Components live in a flat
// concatenated layout; each A x B kernel occupies rows*cols consecutive
// entries, flattened row-major.
class ProductManifold {
 public:
  explicit ProductManifold(std::vector<ManifoldSpec> components);

  const std::vector<ManifoldSpec>& components() const { return components_; }
  std::size_t num_components() const { return components_.size(); }
  const std::vector<Eigen::Index>& offsets() const { return offsets_; }
  Eigen::Index total_ambient_dim() const { return total_; }
  Eigen::Index component_size(std::size_t i) const {
    return components_[i].ambient_dim();
  }

  // Extracts component i of a flat vector as its A x B kernel matrix.
  Eigen::MatrixXd slice(const Eigen::VectorXd& flat, std::size_t i) const;
  void set_slice(Eigen::VectorXd& flat, std::size_t i,
                 const Eigen::MatrixXd& m) const;

  bool operator==(const ProductManifold& other) const {
    return components_ == other.components_;
  }
  bool operator!=(const ProductManifold& other) const {
    return !(*this == other);
  }

 private:
  std::vector<ManifoldSpec> components_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index total_ = 0;
};

struct ProductPoint {
  Eigen::VectorXd values;
};

struct ProductTangent {
  Eigen::VectorXd values;
  Eigen::VectorXd base;  // flat coordinates of the point this lives at
};

double product_constraint_residual(const ProductManifold& M,
                                   const ProductPoint& p);

double product_inner(const ProductManifold& M, const ProductPoint& p,
                     const ProductTangent& u, const ProductTangent& v);

ProductTangent product_tangent_project(const ProductManifold& M,
                                       const ProductPoint& p,
                                       const Eigen::VectorXd& ambient);

ProductPoint product_retract(const ProductManifold& M, const ProductPoint& p,
                             const ProductTangent& v);

double product_grad_norm(const ProductManifold& M, const ProductTangent& g);

// Sum of component curvature tensors; closed forms exist for the
// constant-curvature components only (Stiefel raises Unsupported).
double curvature_tensor_eval(const ProductManifold& M, const ProductPoint& p,
                             const ProductTangent& u, const ProductTangent& v,
                             const ProductTangent& x, const ProductTangent& y);

double sectional_curvature(const ProductManifold& M, const ProductPoint& p,
                           const ProductTangent& u, const ProductTangent& v);

double product_curvature_upper_bound(const ProductManifold& M);

ProductPoint product_random_point(const ProductManifold& M,
                                  std::mt19937_64& rng);
ProductPoint product_random_point(const ProductManifold& M, std::uint64_t seed);
ProductTangent product_random_tangent(const ProductManifold& M,
                                      const ProductPoint& p,
                                      std::mt19937_64& rng);

}  // namespace gsgd
