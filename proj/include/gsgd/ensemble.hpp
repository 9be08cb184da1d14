#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gsgd/product.hpp"

#include "json.hpp"

namespace gsgd {

// Convolution layer geometry: C_l x D_l kernels of size A_l x B_l.
struct LayerShape {
  int layer = 0;
  Eigen::Index kernel_rows = 0;   // A
  Eigen::Index kernel_cols = 0;   // B
  int in_channels = 0;            // C
  int out_channels = 0;           // D

  int kernel_count() const { return in_channels * out_channels; }
  bool operator==(const LayerShape&) const = default;
};

enum class Strategy { PI, PO, PIO, Whole };
std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view name);

// One-based (input channel, output channel) kernel coordinate.
struct KernelCoord {
  int c = 0;
  int d = 0;
  bool operator==(const KernelCoord&) const = default;
  bool operator<(const KernelCoord& o) const {
    return c != o.c ? c < o.c : d < o.d;
  }
};

struct PlanGroup {
  std::vector<KernelCoord> members;  // kept in lexicographic (c,d) order
  ManifoldSpec manifold;             // per-kernel component spec
  bool operator==(const PlanGroup&) const = default;
};

struct EnsemblePlan {
  int layer = 0;
  Strategy strategy = Strategy::Whole;
  std::vector<PlanGroup> groups;
  bool operator==(const EnsemblePlan&) const = default;
};

struct PlanReport {
  std::vector<KernelCoord> uncovered;
  std::vector<KernelCoord> duplicated;
  std::vector<std::string> problems;

  bool ok() const {
    return uncovered.empty() && duplicated.empty() && problems.empty();
  }
  std::string summary() const;
};

// Contiguous near-equal split of {1..n} into m subsets, larger subsets first.
std::vector<std::vector<int>> kss_split(int n, int m);

// Builds a ManifoldSpec of the given kind sized for one kernel of the layer.
ManifoldSpec component_spec(ManifoldKind kind, const LayerShape& shape,
                            double stiefel_bound = 1.0);

EnsemblePlan build_pi(const LayerShape& shape,
                      const std::vector<std::vector<int>>& output_splits,
                      const std::vector<ManifoldSpec>& assignment);

EnsemblePlan build_po(const LayerShape& shape,
                      const std::vector<std::vector<int>>& input_splits,
                      const std::vector<ManifoldSpec>& assignment);

EnsemblePlan build_pio(const LayerShape& shape, std::vector<PlanGroup> groups);

EnsemblePlan build_whole(const LayerShape& shape, const ManifoldSpec& spec);

PlanReport validate_plan(const EnsemblePlan& plan, const LayerShape& shape);

std::vector<ProductManifold> plan_to_products(const EnsemblePlan& plan,
                                              const LayerShape& shape);

nlohmann::json plan_to_json(const EnsemblePlan& plan);
EnsemblePlan plan_from_json(const nlohmann::json& j);

}  // namespace gsgd
