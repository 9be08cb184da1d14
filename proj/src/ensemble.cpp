#include "gsgd/ensemble.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace gsgd {

namespace {

void check_shape_positive(const LayerShape& shape) {
  if (shape.kernel_rows < 1 || shape.kernel_cols < 1 || shape.in_channels < 1 ||
      shape.out_channels < 1) {
    throw ShapeError("layer shape fields must all be positive");
  }
}

// Splits must tile {1..n} exactly; `axis` names the channel axis in errors.
void check_partition(const std::vector<std::vector<int>>& splits, int n,
                     const char* axis) {
  std::vector<int> seen(static_cast<std::size_t>(n) + 1, 0);
  for (const auto& split : splits) {
    if (split.empty()) {
      throw InvalidPartition(std::string("empty ") + axis + "-channel subset");
    }
    for (int idx : split) {
      if (idx < 1 || idx > n) {
        throw InvalidPartition(std::string(axis) + "-channel index " +
                               std::to_string(idx) + " out of range 1.." +
                               std::to_string(n));
      }
      if (++seen[static_cast<std::size_t>(idx)] > 1) {
        throw InvalidPartition(std::string(axis) + "-channel index " +
                               std::to_string(idx) + " assigned twice");
      }
    }
  }
  for (int idx = 1; idx <= n; ++idx) {
    if (seen[static_cast<std::size_t>(idx)] == 0) {
      throw InvalidPartition(std::string(axis) + "-channel index " +
                             std::to_string(idx) + " not covered");
    }
  }
}

void check_assignment(const std::vector<std::vector<int>>& splits,
                      const std::vector<ManifoldSpec>& assignment,
                      const LayerShape& shape) {
  if (assignment.size() != splits.size()) {
    throw InvalidPartition("need one manifold assignment per subset, got " +
                           std::to_string(assignment.size()) + " for " +
                           std::to_string(splits.size()) + " subsets");
  }
  for (const auto& spec : assignment) {
    if (spec.rows != shape.kernel_rows || spec.cols != shape.kernel_cols) {
      throw ShapeError("manifold assignment does not match the layer's " +
                       std::to_string(shape.kernel_rows) + "x" +
                       std::to_string(shape.kernel_cols) + " kernels");
    }
  }
}

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::PI: return "PI";
    case Strategy::PO: return "PO";
    case Strategy::PIO: return "PIO";
    case Strategy::Whole: return "Whole";
  }
  return "?";
}

Strategy strategy_from_string(std::string_view name) {
  if (name == "PI") return Strategy::PI;
  if (name == "PO") return Strategy::PO;
  if (name == "PIO") return Strategy::PIO;
  if (name == "Whole") return Strategy::Whole;
  throw ConfigError("unknown ensemble strategy: " + std::string(name));
}

std::string PlanReport::summary() const {
  if (ok()) return "ok";
  std::ostringstream out;
  auto list = [&out](const char* label, const std::vector<KernelCoord>& coords) {
    if (coords.empty()) return;
    out << label << ":";
    for (const auto& k : coords) out << " (" << k.c << "," << k.d << ")";
    out << "; ";
  };
  list("uncovered", uncovered);
  list("duplicated", duplicated);
  for (const auto& p : problems) out << p << "; ";
  return out.str();
}

std::vector<std::vector<int>> kss_split(int n, int m) {
  if (n < 1 || m < 1) {
    throw InvalidPartition("kss_split needs positive n and m");
  }
  if (m > n) {
    throw TooManyGroups("kss_split: cannot split " + std::to_string(n) +
                        " kernels into " + std::to_string(m) + " subsets");
  }
  const int base = n / m;
  const int remainder = n % m;
  std::vector<std::vector<int>> subsets;
  subsets.reserve(static_cast<std::size_t>(m));
  int next = 1;
  for (int s = 0; s < m; ++s) {
    const int size = base + (s < remainder ? 1 : 0);
    std::vector<int> subset(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) subset[static_cast<std::size_t>(i)] = next++;
    subsets.push_back(std::move(subset));
  }
  return subsets;
}

ManifoldSpec component_spec(ManifoldKind kind, const LayerShape& shape,
                            double stiefel_bound) {
  check_shape_positive(shape);
  switch (kind) {
    case ManifoldKind::Euclidean:
      return ManifoldSpec::euclidean(shape.kernel_rows, shape.kernel_cols);
    case ManifoldKind::Sphere:
      return ManifoldSpec::sphere(shape.kernel_rows, shape.kernel_cols);
    case ManifoldKind::Oblique:
      return ManifoldSpec::oblique(shape.kernel_rows, shape.kernel_cols);
    case ManifoldKind::Stiefel:
      return ManifoldSpec::stiefel(shape.kernel_rows, shape.kernel_cols,
                                   stiefel_bound);
  }
  throw Error("unknown manifold kind");
}

EnsemblePlan build_pi(const LayerShape& shape,
                      const std::vector<std::vector<int>>& output_splits,
                      const std::vector<ManifoldSpec>& assignment) {
  check_shape_positive(shape);
  check_partition(output_splits, shape.out_channels, "output");
  check_assignment(output_splits, assignment, shape);

  EnsemblePlan plan{shape.layer, Strategy::PI, {}};
  plan.groups.reserve(static_cast<std::size_t>(shape.in_channels) *
                      output_splits.size());
  for (int c = 1; c <= shape.in_channels; ++c) {
    for (std::size_t b = 0; b < output_splits.size(); ++b) {
      PlanGroup group;
      group.manifold = assignment[b];
      for (int d : output_splits[b]) group.members.push_back({c, d});
      std::sort(group.members.begin(), group.members.end());
      plan.groups.push_back(std::move(group));
    }
  }
  return plan;
}

EnsemblePlan build_po(const LayerShape& shape,
                      const std::vector<std::vector<int>>& input_splits,
                      const std::vector<ManifoldSpec>& assignment) {
  check_shape_positive(shape);
  check_partition(input_splits, shape.in_channels, "input");
  check_assignment(input_splits, assignment, shape);

  EnsemblePlan plan{shape.layer, Strategy::PO, {}};
  plan.groups.reserve(static_cast<std::size_t>(shape.out_channels) *
                      input_splits.size());
  for (int d = 1; d <= shape.out_channels; ++d) {
    for (std::size_t a = 0; a < input_splits.size(); ++a) {
      PlanGroup group;
      group.manifold = assignment[a];
      for (int c : input_splits[a]) group.members.push_back({c, d});
      std::sort(group.members.begin(), group.members.end());
      plan.groups.push_back(std::move(group));
    }
  }
  return plan;
}

EnsemblePlan build_pio(const LayerShape& shape, std::vector<PlanGroup> groups) {
  check_shape_positive(shape);
  EnsemblePlan plan{shape.layer, Strategy::PIO, std::move(groups)};
  for (auto& group : plan.groups) {
    std::sort(group.members.begin(), group.members.end());
  }
  auto report = validate_plan(plan, shape);
  if (!report.ok()) {
    throw InvalidPartition("PIO groups do not tile the kernel grid: " +
                           report.summary());
  }
  return plan;
}

EnsemblePlan build_whole(const LayerShape& shape, const ManifoldSpec& spec) {
  check_shape_positive(shape);
  PlanGroup group;
  group.manifold = spec;
  for (int c = 1; c <= shape.in_channels; ++c) {
    for (int d = 1; d <= shape.out_channels; ++d) group.members.push_back({c, d});
  }
  EnsemblePlan plan{shape.layer, Strategy::Whole, {std::move(group)}};
  auto report = validate_plan(plan, shape);
  if (!report.ok()) throw InvalidPartition(report.summary());
  return plan;
}

PlanReport validate_plan(const EnsemblePlan& plan, const LayerShape& shape) {
  PlanReport report;
  if (shape.kernel_rows < 1 || shape.kernel_cols < 1 || shape.in_channels < 1 ||
      shape.out_channels < 1) {
    report.problems.push_back("layer shape fields must all be positive");
    return report;
  }

  std::map<KernelCoord, int> count;
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    const auto& group = plan.groups[g];
    if (group.members.empty()) {
      report.problems.push_back("group " + std::to_string(g) + " is empty");
    }
    if (group.manifold.rows != shape.kernel_rows ||
        group.manifold.cols != shape.kernel_cols) {
      report.problems.push_back("group " + std::to_string(g) +
                                " manifold size does not match the kernels");
    }
    for (const auto& coord : group.members) {
      if (coord.c < 1 || coord.c > shape.in_channels || coord.d < 1 ||
          coord.d > shape.out_channels) {
        report.problems.push_back("coordinate (" + std::to_string(coord.c) + "," +
                                  std::to_string(coord.d) + ") out of range");
        continue;
      }
      ++count[coord];
    }
  }
  for (int c = 1; c <= shape.in_channels; ++c) {
    for (int d = 1; d <= shape.out_channels; ++d) {
      auto it = count.find({c, d});
      if (it == count.end()) {
        report.uncovered.push_back({c, d});
      } else if (it->second > 1) {
        report.duplicated.push_back({c, d});
      }
    }
  }
  return report;
}

std::vector<ProductManifold> plan_to_products(const EnsemblePlan& plan,
                                              const LayerShape& shape) {
  auto report = validate_plan(plan, shape);
  if (!report.ok()) {
    throw InvalidPartition("cannot build products from an invalid plan: " +
                           report.summary());
  }
  std::vector<ProductManifold> products;
  products.reserve(plan.groups.size());
  for (const auto& group : plan.groups) {
    std::vector<ManifoldSpec> components(group.members.size(), group.manifold);
    products.emplace_back(std::move(components));
  }
  return products;
}

nlohmann::json plan_to_json(const EnsemblePlan& plan) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& group : plan.groups) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& coord : group.members) {
      members.push_back({coord.c, coord.d});
    }
    nlohmann::json manifold = {{"kind", to_string(group.manifold.kind)},
                               {"rows", group.manifold.rows},
                               {"cols", group.manifold.cols}};
    if (group.manifold.kind == ManifoldKind::Stiefel &&
        group.manifold.curvature_upper_bound != 1.0) {
      manifold["curvature_upper_bound"] = group.manifold.curvature_upper_bound;
    }
    groups.push_back({{"members", std::move(members)},
                      {"manifold", std::move(manifold)}});
  }
  return {{"layer", plan.layer},
          {"strategy", to_string(plan.strategy)},
          {"groups", std::move(groups)}};
}

EnsemblePlan plan_from_json(const nlohmann::json& j) {
  try {
    EnsemblePlan plan;
    plan.layer = j.at("layer").get<int>();
    plan.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    for (const auto& jg : j.at("groups")) {
      PlanGroup group;
      const auto& jm = jg.at("manifold");
      const auto kind = manifold_kind_from_string(jm.at("kind").get<std::string>());
      const auto rows = jm.at("rows").get<Eigen::Index>();
      const auto cols = jm.at("cols").get<Eigen::Index>();
      if (kind == ManifoldKind::Stiefel && jm.contains("curvature_upper_bound")) {
        group.manifold = ManifoldSpec::stiefel(
            rows, cols, jm.at("curvature_upper_bound").get<double>());
      } else {
        group.manifold = ManifoldSpec::make(kind, rows, cols);
      }
      for (const auto& jc : jg.at("members")) {
        group.members.push_back({jc.at(0).get<int>(), jc.at(1).get<int>()});
      }
      plan.groups.push_back(std::move(group));
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad plan JSON: ") + e.what());
  }
}

}  // namespace gsgd
