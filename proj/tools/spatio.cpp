#include <iostream>

#include "CLI11.hpp"
#include "spatio/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spatiotemporal incidence forecasting: ingest, folds, train, evaluate, analyze, report"};
  app.require_subcommand(1);

  std::string config_path;
  spatio::cli::CommandOptions options;
  std::string seed_list;
  app.add_option("--config", config_path, "Experiment YAML file")->required();
  app.add_option("--jobs", options.jobs, "Concurrent training runs")->check(CLI::PositiveNumber);
  app.add_flag("--force", options.force, "Retrain runs that already completed");
  app.add_option("--seed-list", seed_list, "Comma-separated seeds overriding the config");

  app.fallthrough();
  for (const char* name : {"ingest", "folds", "train", "evaluate", "analyze", "report"}) {
    app.add_subcommand(name);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : spatio::cli::kExitConfigError;
  }
  if (!seed_list.empty()) {
    try {
      options.seeds = spatio::cli::parse_seed_list(seed_list);
    } catch (const std::exception& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return spatio::cli::kExitConfigError;
    }
  }
  return spatio::cli::run_command(app.get_subcommands().front()->get_name(), config_path, options);
}
