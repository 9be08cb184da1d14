#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gsgd/checkpoint.hpp"
#include "gsgd/objectives.hpp"

namespace gsgd {

// Exit codes of the CLI front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;     // bad config / plan mismatch
inline constexpr int kExitNumerical = 3;  // non-finite values, corrupt data

struct DatasetConfig {
  std::string path;  // when set, load this PEMD file instead of generating
  int classes = 4;
  int per_class = 64;
  std::uint64_t seed = 1;
  Eigen::Index rows = 8;
  Eigen::Index cols = 8;
  int channels = 2;
};

struct ObjectiveConfig {
  std::string kind;  // rayleigh | procrustes | mlp | conv
  Eigen::MatrixXd matrix;        // rayleigh
  Eigen::MatrixXd target;        // procrustes
  Eigen::MatrixXd conditioning;  // procrustes, optional
  DatasetConfig dataset;         // mlp / conv
  int hidden = 8;                // mlp
  int channels = 4;              // conv output channels
  Eigen::Index kernel_rows = 3;  // conv
  Eigen::Index kernel_cols = 3;  // conv
};

// How one layer of the objective is carved into PEMs.
struct LayerStrategyConfig {
  std::optional<LayerShape> shape;  // must match the objective when given
  Strategy strategy = Strategy::Whole;
  int splits = 1;                  // PI/PO: number of groups per channel
  std::vector<ManifoldKind> kinds{ManifoldKind::Sphere};  // cycled per group
  double stiefel_bound = 1.0;
  nlohmann::json groups;  // PIO: explicit groups, plan-JSON schema
};

struct ExperimentConfig {
  ObjectiveConfig objective;
  std::vector<LayerStrategyConfig> layers;  // empty = Whole/sphere everywhere
  OptimizerOptions optimizer;
  long iterations = 0;
  long batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  bool strict = false;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

std::unique_ptr<Objective> make_objective(const ObjectiveConfig& cfg,
                                          std::ostream* log = nullptr);
EnsemblePlan make_plan(const LayerStrategyConfig& cfg, const LayerShape& shape);

// The fully constructed run: objective + plans + optimizer, pre-training.
struct Experiment {
  ExperimentConfig config;
  std::unique_ptr<Objective> objective;
  Optimizer optimizer;
};

// Builds state from scratch (run) or from a checkpoint (resume); throws
// ConfigError / CheckpointError on any mismatch.
Experiment build_experiment(const ExperimentConfig& config, std::ostream* log);
Experiment resume_experiment(const ExperimentConfig& config,
                             const std::string& checkpoint_path,
                             std::ostream* log);

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<long> iterations;
  std::optional<std::string> out_dir;
  bool strict = false;
};
void apply_overrides(ExperimentConfig& config, const CliOverrides& overrides);

// Subcommand entry points; they write human-readable progress to `out` and a
// machine-readable error JSON line to `err` on failure.
int cmd_run(const std::string& config_path, const CliOverrides& overrides,
            std::ostream& out, std::ostream& err);
int cmd_resume(const std::string& checkpoint_path,
               const std::string& config_path, const CliOverrides& overrides,
               std::ostream& out, std::ostream& err);
int cmd_inspect(const std::string& checkpoint_path, std::ostream& out,
                std::ostream& err);

}  // namespace gsgd
