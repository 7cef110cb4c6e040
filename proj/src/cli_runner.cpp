#include "seqhom/cli_runner.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "seqhom/experiments.hpp"

namespace seqhom {

namespace {

nlohmann::json read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read configuration file '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ConfigError("configuration file '" + path + "' is not a JSON object");
  }
  return j;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Sequential homotopy solver experiments"};
  app.require_subcommand(1);

  std::string experiment;
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  CLI::App* run = app.add_subcommand("run", "Run a named experiment");
  run->add_option("experiment", experiment, "Experiment name (see 'list')")->required();
  run->add_option("--config", config_path, "JSON configuration file");
  run->add_option("--set", sets, "Override a configuration value, e.g. driver.rho=1")
      ->take_all();
  run->add_option("--out", out_dir, "Output directory");

  app.add_subcommand("list", "List the built-in experiments");
  app.add_subcommand("check", "Run derivative and metric self-checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  if (app.got_subcommand("list")) {
    list_experiments(std::cout);
    return kExitOk;
  }
  if (app.got_subcommand("check")) return run_self_check(std::cout);

  try {
    std::optional<nlohmann::json> file;
    if (!config_path.empty()) file = read_config_file(config_path);
    std::optional<std::string> out;
    if (!out_dir.empty()) out = out_dir;
    const ExperimentConfig cfg = resolve_config(experiment, file, sets, out);
    const int code = run_experiment(cfg, std::cerr);
    std::cerr << "artifacts written to " << cfg.out << " (exit code " << code << ")\n";
    return code;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace seqhom
