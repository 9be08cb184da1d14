#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "gsgd/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"G-SGD on ensembles of products of embedded kernel submanifolds"};
  app.require_subcommand(1);

  gsgd::CliOverrides overrides;
  std::string config_path;
  std::string checkpoint_path;

  auto add_common = [&overrides](CLI::App* cmd) {
    cmd->add_option("--seed", overrides.seed, "Override the run seed");
    cmd->add_option("--iterations", overrides.iterations,
                    "Override the iteration count");
    cmd->add_option("--out-dir", overrides.out_dir,
                    "Override the output directory");
    cmd->add_flag("--strict", overrides.strict,
                  "Force strict (bitwise-reproducible) mode");
  };

  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("config", config_path, "Experiment config (JSON)")
      ->required();
  add_common(run);

  auto* resume =
      app.add_subcommand("resume", "Continue a run from a checkpoint");
  resume->add_option("checkpoint", checkpoint_path, "Checkpoint file (PEMC)")
      ->required();
  resume->add_option("config", config_path, "Experiment config (JSON)")
      ->required();
  add_common(resume);

  auto* inspect =
      app.add_subcommand("inspect", "Describe a checkpoint's contents");
  inspect->add_option("checkpoint", checkpoint_path, "Checkpoint file (PEMC)")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gsgd::kExitConfig;
  }

  if (run->parsed())
    return gsgd::cmd_run(config_path, overrides, std::cout, std::cerr);
  if (resume->parsed())
    return gsgd::cmd_resume(checkpoint_path, config_path, overrides, std::cout,
                            std::cerr);
  return gsgd::cmd_inspect(checkpoint_path, std::cout, std::cerr);
}
