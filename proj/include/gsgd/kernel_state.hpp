#pragma once

#include <cstdint>
#include <vector>

#include "gsgd/ensemble.hpp"

namespace gsgd {

// Euclidean gradient of a loss w.r.t. every kernel of one layer, indexed
// like the kernel grid: entry (c-1)*D + (d-1) holds dL/dW_{c,d}.
struct LayerGrad {
  std::vector<Eigen::MatrixXd> kernels;
};

// The full set of kernels of a model, stored PEM-by-PEM according to the
// ensemble plans. Bridges between the (c,d) kernel-grid view used by
// objectives and the flat product-point view used by the optimizer.
class KernelState {
 public:
  struct Layer {
    LayerShape shape;
    EnsemblePlan plan;
    std::vector<ProductManifold> products;
    std::vector<ProductPoint> points;
  };

  void add_layer(const LayerShape& shape, const EnsemblePlan& plan);

  std::size_t num_layers() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }

  // Draws fresh on-manifold points for every PEM, deterministically.
  void randomize(std::uint64_t seed);

  Eigen::MatrixXd kernel(std::size_t layer, int c, int d) const;
  // All kernels of a layer in (c,d) grid order, for objective evaluation.
  std::vector<Eigen::MatrixXd> layer_kernels(std::size_t layer) const;
  // Constrains an externally supplied kernel onto its component manifold.
  void set_kernel(std::size_t layer, int c, int d, const Eigen::MatrixXd& w);

  // Reorders per-kernel Euclidean gradients into one flat ambient vector per
  // PEM, matching each product's component layout.
  std::vector<Eigen::VectorXd> scatter(std::size_t layer,
                                       const LayerGrad& grad) const;

  ProductPoint& point(std::size_t layer, std::size_t pem);
  const ProductPoint& point(std::size_t layer, std::size_t pem) const;

  // Worst constraint residual across every PEM of every layer.
  double max_constraint_residual() const;

 private:
  struct Slot {
    std::size_t pem = 0;
    std::size_t component = 0;
  };
  const Slot& slot(std::size_t layer, int c, int d) const;

  std::vector<Layer> layers_;
  std::vector<std::vector<Slot>> slots_;  // per layer, indexed (c-1)*D+(d-1)
};

}  // namespace gsgd
