#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsgd/optimizer.hpp"
#include "json.hpp"

namespace gsgd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// In-memory image of a "PEMC" checkpoint file: everything needed to rebuild
// an optimizer mid-run. Point payloads are stored as little-endian 64-bit
// floats, so save/load round-trips are bitwise.
struct Checkpoint {
  struct Layer {
    LayerShape shape;
    EnsemblePlan plan;
    std::vector<Eigen::VectorXd> points;  // one flat vector per PEM
  };

  std::uint32_t version = kCheckpointVersion;
  long iteration = 0;
  OptimizerOptions options;
  std::vector<Layer> layers;
};

Checkpoint make_checkpoint(const Optimizer& optimizer);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Parses the file and validates its structure against the embedded plans;
// constraint residuals are checked later by restore_optimizer.
Checkpoint read_checkpoint(const std::string& path);

// Rebuilds the optimizer state. Every stored point must satisfy its
// manifold constraints to 1e-6, otherwise CheckpointError.
Optimizer restore_optimizer(const Checkpoint& ckpt);

Optimizer load_checkpoint(const std::string& path);

// JSON forms shared by the checkpoint header and the experiment config.
nlohmann::json shape_to_json(const LayerShape& shape);
LayerShape shape_from_json(const nlohmann::json& j);
nlohmann::json schedule_to_json(const ScheduleConfig& cfg);
ScheduleConfig schedule_from_json(const nlohmann::json& j);
nlohmann::json rho_to_json(const RhoConfig& cfg);
RhoConfig rho_from_json(const nlohmann::json& j);
nlohmann::json optimizer_options_to_json(const OptimizerOptions& options);
OptimizerOptions optimizer_options_from_json(const nlohmann::json& j);

}  // namespace gsgd
