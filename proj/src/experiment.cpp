#include "gsgd/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "gsgd/errors.hpp"

namespace gsgd {

namespace {

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j,
                                 const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ConfigError(what + " must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ConfigError(what + " rows must all have the same length");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

DatasetConfig dataset_from_json(const nlohmann::json& j) {
  DatasetConfig cfg;
  cfg.path = j.value("path", cfg.path);
  cfg.classes = j.value("classes", cfg.classes);
  cfg.per_class = j.value("per_class", cfg.per_class);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.rows = j.value("rows", cfg.rows);
  cfg.cols = j.value("cols", cfg.cols);
  cfg.channels = j.value("channels", cfg.channels);
  return cfg;
}

SyntheticDataset realize_dataset(const DatasetConfig& cfg) {
  if (!cfg.path.empty()) return load_dataset(cfg.path);
  return make_synthetic_dataset(cfg.classes, cfg.per_class, cfg.seed, cfg.rows,
                                cfg.cols, cfg.channels);
}

ObjectiveConfig objective_from_json(const nlohmann::json& j) {
  ObjectiveConfig cfg;
  if (!j.contains("kind")) throw ConfigError("objective.kind is required");
  cfg.kind = j.at("kind").get<std::string>();
  if (cfg.kind == "rayleigh") {
    if (!j.contains("matrix"))
      throw ConfigError("rayleigh objective needs a matrix");
    cfg.matrix = matrix_from_json(j.at("matrix"), "objective.matrix");
  } else if (cfg.kind == "procrustes") {
    if (!j.contains("target"))
      throw ConfigError("procrustes objective needs a target");
    cfg.target = matrix_from_json(j.at("target"), "objective.target");
    if (j.contains("conditioning"))
      cfg.conditioning =
          matrix_from_json(j.at("conditioning"), "objective.conditioning");
  } else if (cfg.kind == "mlp" || cfg.kind == "conv") {
    if (j.contains("dataset")) cfg.dataset = dataset_from_json(j.at("dataset"));
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.channels = j.value("channels", cfg.channels);
    cfg.kernel_rows = j.value("kernel_rows", cfg.kernel_rows);
    cfg.kernel_cols = j.value("kernel_cols", cfg.kernel_cols);
  } else {
    throw ConfigError("unknown objective kind: " + cfg.kind);
  }
  return cfg;
}

LayerStrategyConfig layer_from_json(const nlohmann::json& j) {
  LayerStrategyConfig cfg;
  if (j.contains("shape")) cfg.shape = shape_from_json(j.at("shape"));
  if (j.contains("strategy"))
    cfg.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  cfg.splits = j.value("splits", cfg.splits);
  if (j.contains("kinds")) {
    cfg.kinds.clear();
    for (const auto& name : j.at("kinds"))
      cfg.kinds.push_back(manifold_kind_from_string(name.get<std::string>()));
    if (cfg.kinds.empty()) throw ConfigError("layer kinds must not be empty");
  }
  cfg.stiefel_bound = j.value("stiefel_bound", cfg.stiefel_bound);
  if (j.contains("groups")) cfg.groups = j.at("groups");
  return cfg;
}

void emit_error(std::ostream& err, const std::string& type,
                const std::string& message, long iteration = -1) {
  nlohmann::ordered_json e;
  e["error"]["type"] = type;
  e["error"]["message"] = message;
  if (iteration >= 0) e["error"]["iteration"] = iteration;
  err << e.dump() << "\n";
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const NonFiniteGradient& e) {
    emit_error(err, "NonFiniteGradient", e.what(), e.iteration());
    return kExitNumerical;
  } catch (const CheckpointError& e) {
    emit_error(err, "CheckpointError", e.what());
    return kExitNumerical;
  } catch (const ConfigError& e) {
    emit_error(err, "ConfigError", e.what());
    return kExitConfig;
  } catch (const Error& e) {
    emit_error(err, "ConfigError", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    emit_error(err, "InternalError", e.what());
    return kExitConfig;
  }
}

// Runs training and writes trace.csv, summary.json, checkpoint.pemc.
int execute(Experiment& exp, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  const fs::path dir(exp.config.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create out_dir " + dir.string());
  const std::string trace_path = (dir / "trace.csv").string();
  const std::string summary_path = (dir / "summary.json").string();
  const std::string ckpt_path = (dir / "checkpoint.pemc").string();

  std::ofstream trace(trace_path, std::ios::binary | std::ios::trunc);
  if (!trace) throw ConfigError("out_dir not writable: " + trace_path);
  write_trace_header(trace);

  long quadratic = 0, linear = 0, floored = 0;
  TraceRecord last;
  bool any_record = false;

  TrainOptions topt;
  topt.iterations = exp.config.iterations;
  topt.batch_size = exp.config.batch_size;
  topt.seed = exp.config.seed;
  topt.log = &err;
  topt.on_record = [&](const TraceRecord& rec) {
    write_trace_row(trace, rec);
    last = rec;
    any_record = true;
  };
  topt.on_step = [&](const std::vector<StepDiagnostics>& diags) {
    for (const auto& d : diags) {
      (d.gamma2_branch == 0 ? quadratic : linear) += 1;
      if (d.floored) floored += 1;
    }
  };

  const auto t0 = std::chrono::steady_clock::now();
  train(*exp.objective, exp.optimizer, topt);
  const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
  trace.flush();
  if (!trace) throw ConfigError("failed writing " + trace_path);

  save_checkpoint(make_checkpoint(exp.optimizer), ckpt_path);

  nlohmann::ordered_json summary;
  summary["final_loss"] = exp.objective->loss(exp.optimizer.state());
  summary["final_grad_norm"] = any_record ? last.grad_norm_max : 0.0;
  summary["iterations"] = exp.config.iterations;
  summary["wall_time_ms"] = wall_ms;
  summary["branch_counts"] = {
      {"quadratic", quadratic}, {"linear", linear}, {"floored", floored}};
  const auto acc =
      exp.objective->accuracy(exp.objective->collect(exp.optimizer.state()));
  if (acc) summary["final_accuracy"] = *acc;

  std::ofstream sout(summary_path, std::ios::binary | std::ios::trunc);
  if (!sout) throw ConfigError("out_dir not writable: " + summary_path);
  sout << summary.dump(2) << "\n";
  sout.flush();
  if (!sout) throw ConfigError("failed writing " + summary_path);

  out << exp.objective->name() << ": " << exp.config.iterations
      << " iterations, final loss " << summary["final_loss"].get<double>()
      << ", artifacts in " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  try {
    ExperimentConfig cfg;
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (!j.contains("objective"))
      throw ConfigError("config needs an objective");
    cfg.objective = objective_from_json(j.at("objective"));
    if (j.contains("layers")) {
      if (!j.at("layers").is_array())
        throw ConfigError("layers must be an array");
      for (const auto& entry : j.at("layers"))
        cfg.layers.push_back(layer_from_json(entry));
    }
    if (j.contains("optimizer"))
      cfg.optimizer = optimizer_options_from_json(j.at("optimizer"));
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.strict = j.value("strict", cfg.strict);
    if (cfg.iterations < 0) throw ConfigError("iterations must be >= 0");
    if (cfg.batch_size < 0) throw ConfigError("batch_size must be >= 0");
    if (cfg.out_dir.empty()) throw ConfigError("out_dir must not be empty");
    cfg.optimizer.schedule.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

std::unique_ptr<Objective> make_objective(const ObjectiveConfig& cfg,
                                          std::ostream* log) {
  if (cfg.kind == "rayleigh")
    return std::make_unique<RayleighObjective>(cfg.matrix, log);
  if (cfg.kind == "procrustes")
    return std::make_unique<ProcrustesObjective>(cfg.target, cfg.conditioning);
  if (cfg.kind == "mlp")
    return std::make_unique<MlpObjective>(realize_dataset(cfg.dataset),
                                          cfg.hidden);
  if (cfg.kind == "conv")
    return std::make_unique<ConvObjective>(realize_dataset(cfg.dataset),
                                           cfg.channels, cfg.kernel_rows,
                                           cfg.kernel_cols);
  throw ConfigError("unknown objective kind: " + cfg.kind);
}

EnsemblePlan make_plan(const LayerStrategyConfig& cfg, const LayerShape& shape) {
  auto assignment = [&](int groups) {
    std::vector<ManifoldSpec> specs;
    for (int g = 0; g < groups; ++g) {
      const auto kind = cfg.kinds[static_cast<std::size_t>(g) % cfg.kinds.size()];
      specs.push_back(component_spec(kind, shape, cfg.stiefel_bound));
    }
    return specs;
  };

  switch (cfg.strategy) {
    case Strategy::PI:
      return build_pi(shape, kss_split(shape.out_channels, cfg.splits),
                      assignment(cfg.splits));
    case Strategy::PO:
      return build_po(shape, kss_split(shape.in_channels, cfg.splits),
                      assignment(cfg.splits));
    case Strategy::PIO: {
      if (!cfg.groups.is_array() || cfg.groups.empty())
        throw ConfigError("pio strategy needs an explicit groups array");
      nlohmann::json plan_json = {{"layer", shape.layer},
                                  {"strategy", "PIO"},
                                  {"groups", cfg.groups}};
      return build_pio(shape, plan_from_json(plan_json).groups);
    }
    case Strategy::Whole:
      return build_whole(shape, component_spec(cfg.kinds[0], shape,
                                               cfg.stiefel_bound));
  }
  throw ConfigError("unknown strategy");
}

Experiment build_experiment(const ExperimentConfig& config, std::ostream* log) {
  auto objective = make_objective(config.objective, log);
  const auto layout = objective->layout();

  std::vector<LayerStrategyConfig> layers = config.layers;
  if (layers.empty()) layers.resize(layout.size());
  if (layers.size() != layout.size())
    throw ConfigError("config has " + std::to_string(layers.size()) +
                      " layer entries but the objective has " +
                      std::to_string(layout.size()) + " layers");

  KernelState state;
  for (std::size_t l = 0; l < layout.size(); ++l) {
    if (layers[l].shape && !(*layers[l].shape == layout[l]))
      throw ConfigError("layer " + std::to_string(l) +
                        " shape does not match the objective layout");
    auto plan = make_plan(layers[l], layout[l]);
    const auto report = validate_plan(plan, layout[l]);
    if (!report.ok())
      throw ConfigError("layer " + std::to_string(l) +
                        " plan invalid: " + report.summary());
    state.add_layer(layout[l], plan);
  }
  state.randomize(config.seed);

  Optimizer optimizer(std::move(state), config.optimizer);
  return Experiment{config, std::move(objective), std::move(optimizer)};
}

Experiment resume_experiment(const ExperimentConfig& config,
                             const std::string& checkpoint_path,
                             std::ostream* log) {
  auto ckpt = read_checkpoint(checkpoint_path);

  auto objective = make_objective(config.objective, log);
  const auto layout = objective->layout();
  std::vector<LayerStrategyConfig> layers = config.layers;
  if (layers.empty()) layers.resize(layout.size());
  if (layers.size() != layout.size())
    throw ConfigError("config has " + std::to_string(layers.size()) +
                      " layer entries but the objective has " +
                      std::to_string(layout.size()) + " layers");

  if (ckpt.layers.size() != layout.size())
    throw ConfigError("checkpoint has " + std::to_string(ckpt.layers.size()) +
                      " layers but the config builds " +
                      std::to_string(layout.size()));
  for (std::size_t l = 0; l < layout.size(); ++l) {
    if (!(ckpt.layers[l].shape == layout[l]))
      throw ConfigError("layer " + std::to_string(l) +
                        ": checkpoint shape does not match the config");
    auto plan = make_plan(layers[l], layout[l]);
    if (!(ckpt.layers[l].plan == plan))
      throw ConfigError("layer " + std::to_string(l) +
                        ": checkpoint plan does not match the config");
  }
  if (log && !(ckpt.options == config.optimizer))
    *log << "warning: optimizer options differ from the checkpoint; "
            "continuing with the config's options\n";

  Optimizer restored = restore_optimizer(ckpt);
  const long iteration = restored.iteration();
  Optimizer optimizer(std::move(restored.state()), config.optimizer);
  optimizer.set_iteration(iteration);
  return Experiment{config, std::move(objective), std::move(optimizer)};
}

void apply_overrides(ExperimentConfig& config, const CliOverrides& overrides) {
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.iterations) config.iterations = *overrides.iterations;
  if (overrides.out_dir) config.out_dir = *overrides.out_dir;
  if (overrides.strict) config.strict = true;
}

int cmd_run(const std::string& config_path, const CliOverrides& overrides,
            std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig config = load_config(config_path);
    apply_overrides(config, overrides);
    Experiment exp = build_experiment(config, &err);
    return execute(exp, out, err);
  });
}

int cmd_resume(const std::string& checkpoint_path,
               const std::string& config_path, const CliOverrides& overrides,
               std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig config = load_config(config_path);
    apply_overrides(config, overrides);
    Experiment exp = resume_experiment(config, checkpoint_path, &err);
    return execute(exp, out, err);
  });
}

int cmd_inspect(const std::string& checkpoint_path, std::ostream& out,
                std::ostream& err) {
  return guarded(err, [&] {
    const Checkpoint ckpt = read_checkpoint(checkpoint_path);
    out << "checkpoint: " << checkpoint_path << "\n"
        << "version: " << ckpt.version << "\n"
        << "iteration: " << ckpt.iteration << "\n"
        << "options: " << optimizer_options_to_json(ckpt.options).dump()
        << "\n"
        << "layers: " << ckpt.layers.size() << "\n";

    bool flagged = false;
    for (std::size_t l = 0; l < ckpt.layers.size(); ++l) {
      const auto& layer = ckpt.layers[l];
      const auto products = plan_to_products(layer.plan, layer.shape);
      out << "layer " << l << ": " << layer.shape.kernel_rows << "x"
          << layer.shape.kernel_cols << "x" << layer.shape.in_channels << "x"
          << layer.shape.out_channels << ", strategy "
          << to_string(layer.plan.strategy) << ", " << products.size()
          << " PEM(s)\n";
      for (std::size_t m = 0; m < products.size(); ++m) {
        // Tally components by kind and size for a compact description.
        std::map<std::string, int> tally;
        for (const auto& spec : products[m].components()) {
          std::ostringstream key;
          key << to_string(spec.kind) << "(" << spec.rows << "x" << spec.cols
              << ")";
          tally[key.str()] += 1;
        }
        std::ostringstream desc;
        for (auto it = tally.begin(); it != tally.end(); ++it) {
          if (it != tally.begin()) desc << " + ";
          desc << it->second << " x " << it->first;
        }
        const ProductPoint point{layer.points[m]};
        const double residual =
            product_constraint_residual(products[m], point);
        out << "  pem " << m << ": " << desc.str() << ", norm "
            << point.values.norm() << ", residual " << residual;
        if (!(residual < 1e-6)) {
          out << "  FLAGGED";
          flagged = true;
        }
        out << "\n";
      }
    }
    if (flagged) {
      out << "constraint violations detected\n";
      return kExitNumerical;
    }
    return kExitOk;
  });
}

}  // namespace gsgd
