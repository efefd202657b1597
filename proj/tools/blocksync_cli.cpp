// blocksync: run synchronization experiments and compare their results.
//
//   blocksync run --config <path> --out <dir> [--seed <u64>] [--single-thread]
//   blocksync compare <dir>...
//   blocksync print-config            (annotated default configuration)

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "blocksync/errors.hpp"
#include "blocksync/experiment.hpp"

namespace {

int run_command(const std::string& config_path, std::string out_dir, std::optional<std::uint64_t> seed,
                bool single_thread) {
  auto config = blocksync::load_config(config_path);
  if (seed) config.seed = *seed;
  if (out_dir.empty()) out_dir = config.output_dir;
  if (out_dir.empty()) throw blocksync::ConfigError("output_dir", "no output directory (use --out)");
  config.output_dir = out_dir;

  blocksync::RunOptions options;
  options.mode = single_thread ? blocksync::ExecutionMode::kSingleThread : blocksync::ExecutionMode::kThreaded;
  const auto result = blocksync::run_experiment(config, options);
  blocksync::write_artifacts(out_dir, config, result);
  std::cout << "wrote " << result.val_curves.size() << " curve rows to " << out_dir << "\n";
  for (const auto& f : result.finals) {
    std::cout << "  " << blocksync::to_string(f.strategy) << " test_fer=" << f.test_fer << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-parallel training simulator: BMUF with MA/EMA shadow models"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Train one configuration and write curves.csv, final.csv, manifest.cfg");
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool single_thread = false;
  run->add_option("--config", config_path, "Experiment configuration file")->required();
  run->add_option("--out", out_dir, "Output directory (overrides output_dir in the config)");
  run->add_option("--seed", seed, "Override the master seed");
  run->add_flag("--single-thread", single_thread, "Simulate all workers on one thread (identical results)");

  auto* compare = app.add_subcommand("compare", "Summarize final test FER of completed runs");
  std::vector<std::string> run_dirs;
  compare->add_option("dirs", run_dirs, "Run directories")->required();

  app.add_subcommand("print-config", "Print the annotated default configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config_path, out_dir, seed, single_thread);
    if (*compare) {
      std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
      std::cout << blocksync::compare_runs(dirs);
      return 0;
    }
    std::cout << blocksync::serialize_config(blocksync::ExperimentConfig{});
    return 0;
  } catch (const blocksync::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
