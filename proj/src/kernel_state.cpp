#include "gsgd/kernel_state.hpp"

#include <string>

namespace gsgd {

namespace {

std::size_t grid_index(const LayerShape& shape, int c, int d) {
  if (c < 1 || c > shape.in_channels || d < 1 || d > shape.out_channels) {
    throw ShapeError("kernel coordinate (" + std::to_string(c) + "," +
                     std::to_string(d) + ") out of range for layer " +
                     std::to_string(shape.layer));
  }
  return static_cast<std::size_t>(c - 1) *
             static_cast<std::size_t>(shape.out_channels) +
         static_cast<std::size_t>(d - 1);
}

}  // namespace

void KernelState::add_layer(const LayerShape& shape, const EnsemblePlan& plan) {
  auto report = validate_plan(plan, shape);
  if (!report.ok()) {
    throw InvalidPartition("layer " + std::to_string(shape.layer) +
                           " plan invalid: " + report.summary());
  }
  Layer layer{shape, plan, plan_to_products(plan, shape), {}};

  std::vector<Slot> slots(static_cast<std::size_t>(shape.kernel_count()));
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    const auto& members = plan.groups[g].members;
    for (std::size_t j = 0; j < members.size(); ++j) {
      slots[grid_index(shape, members[j].c, members[j].d)] = {g, j};
    }
  }

  layer.points.reserve(layer.products.size());
  for (const auto& product : layer.products) {
    layer.points.push_back(product_random_point(product, std::uint64_t{0}));
  }

  layers_.push_back(std::move(layer));
  slots_.push_back(std::move(slots));
}

void KernelState::randomize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& layer : layers_) {
    for (std::size_t g = 0; g < layer.products.size(); ++g) {
      layer.points[g] = product_random_point(layer.products[g], rng);
    }
  }
}

const KernelState::Slot& KernelState::slot(std::size_t layer, int c,
                                           int d) const {
  return slots_.at(layer)[grid_index(layers_.at(layer).shape, c, d)];
}

Eigen::MatrixXd KernelState::kernel(std::size_t layer, int c, int d) const {
  const auto& s = slot(layer, c, d);
  const auto& L = layers_[layer];
  return L.products[s.pem].slice(L.points[s.pem].values, s.component);
}

std::vector<Eigen::MatrixXd> KernelState::layer_kernels(std::size_t layer) const {
  const auto& L = layers_.at(layer);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(L.shape.kernel_count()));
  for (int c = 1; c <= L.shape.in_channels; ++c) {
    for (int d = 1; d <= L.shape.out_channels; ++d) {
      out.push_back(kernel(layer, c, d));
    }
  }
  return out;
}

void KernelState::set_kernel(std::size_t layer, int c, int d,
                             const Eigen::MatrixXd& w) {
  const auto& s = slot(layer, c, d);
  auto& L = layers_[layer];
  const auto& spec = L.products[s.pem].components()[s.component];
  L.products[s.pem].set_slice(L.points[s.pem].values, s.component,
                              project_to_manifold(spec, w).values);
}

std::vector<Eigen::VectorXd> KernelState::scatter(std::size_t layer,
                                                  const LayerGrad& grad) const {
  const auto& L = layers_.at(layer);
  if (grad.kernels.size() != static_cast<std::size_t>(L.shape.kernel_count())) {
    throw ShapeError("layer gradient holds " +
                     std::to_string(grad.kernels.size()) + " kernels, layer " +
                     std::to_string(L.shape.layer) + " has " +
                     std::to_string(L.shape.kernel_count()));
  }
  std::vector<Eigen::VectorXd> flats;
  flats.reserve(L.products.size());
  for (const auto& product : L.products) {
    flats.emplace_back(product.total_ambient_dim());
  }
  for (std::size_t g = 0; g < L.plan.groups.size(); ++g) {
    const auto& members = L.plan.groups[g].members;
    for (std::size_t j = 0; j < members.size(); ++j) {
      const auto& gk = grad.kernels[grid_index(L.shape, members[j].c, members[j].d)];
      if (gk.rows() != L.shape.kernel_rows || gk.cols() != L.shape.kernel_cols) {
        throw ShapeError("gradient for kernel (" + std::to_string(members[j].c) +
                         "," + std::to_string(members[j].d) +
                         ") has the wrong shape");
      }
      L.products[g].set_slice(flats[g], j, gk);
    }
  }
  return flats;
}

ProductPoint& KernelState::point(std::size_t layer, std::size_t pem) {
  return layers_.at(layer).points.at(pem);
}

const ProductPoint& KernelState::point(std::size_t layer, std::size_t pem) const {
  return layers_.at(layer).points.at(pem);
}

double KernelState::max_constraint_residual() const {
  double worst = 0.0;
  for (const auto& layer : layers_) {
    for (std::size_t g = 0; g < layer.products.size(); ++g) {
      worst = std::max(
          worst, product_constraint_residual(layer.products[g], layer.points[g]));
    }
  }
  return worst;
}

}  // namespace gsgd
