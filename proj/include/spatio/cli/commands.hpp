#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spatio/cli/config.hpp"

namespace spatio::cli {

enum ExitCode : int { kExitOk = 0, kExitRunFailure = 1, kExitConfigError = 2 };

struct CommandOptions {
  std::size_t jobs = 1;
  bool force = false;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::ostream* log = nullptr;  // std::cerr when null
};

/// One cell of the experiment grid.
struct RunSpec {
  std::string channels;
  model::Variant variant = model::Variant::kTrans;
  std::size_t horizon = 0;
  std::string fold;
  std::uint64_t seed = 0;
};

/// `<region_set>_<channels>_<variant>_F<F>_fold<k>_seed<s>`, variant without '+'.
std::string run_id(const ExperimentConfig& config, const RunSpec& spec);
/// Variant x channel set x horizon x fold x seed, in that nesting order.
std::vector<RunSpec> run_grid(const ExperimentConfig& config);

std::filesystem::path panel_path(const ExperimentConfig& config);
std::filesystem::path runs_dir(const ExperimentConfig& config);

int cmd_ingest(const ExperimentConfig& config, const CommandOptions& options);
int cmd_folds(const ExperimentConfig& config, const CommandOptions& options);
int cmd_train(const ExperimentConfig& config, const CommandOptions& options);
int cmd_evaluate(const ExperimentConfig& config, const CommandOptions& options);
/// Writes the analysis artifacts into `target` (default `<out>/analysis`).
int cmd_analyze(const ExperimentConfig& config, const CommandOptions& options,
                const std::optional<std::filesystem::path>& target = std::nullopt);
int cmd_report(const ExperimentConfig& config, const CommandOptions& options);

/// Loads the config, applies option overrides and dispatches `command`,
/// mapping exceptions onto exit codes.
int run_command(const std::string& command, const std::filesystem::path& config_path, const CommandOptions& options);

}  // namespace spatio::cli
