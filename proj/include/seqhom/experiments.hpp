#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "seqhom/homotopy_driver.hpp"

namespace seqhom {

/// Invalid or inconsistent experiment configuration (exit code 3).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitNonconvergence = 2;
inline constexpr int kExitConfigError = 3;

struct ExperimentInfo {
  std::string name;
  std::string description;
  /// Defaults of the "problem" section.
  nlohmann::json problem_defaults;
  DriverParams driver_defaults;
};

const std::vector<ExperimentInfo>& experiment_catalog();

/// Throws ConfigError for unknown names.
const ExperimentInfo& find_experiment(const std::string& name);

/**
 * Fully resolved configuration. JSON layout:
 *
 *   {
 *     "experiment": "<name>",
 *     "seed": 0,
 *     "out": "<directory>",
 *     "driver": { DriverParams fields },
 *     "problem": { experiment-specific fields }
 *   }
 */
struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string out;
  DriverParams driver;
  nlohmann::json problem;

  nlohmann::json to_json() const;
};

nlohmann::json driver_to_json(const DriverParams& params);
/// Overlays `j` onto `base`; unknown keys and wrong types raise ConfigError.
DriverParams driver_from_json(const nlohmann::json& j, DriverParams base = {});

/// Defaults, then `file`, then `--set key.path=value` overrides, then `out`.
/// Values in `sets` are parsed as JSON when possible and as strings otherwise.
ExperimentConfig resolve_config(const std::string& experiment,
                                const std::optional<nlohmann::json>& file,
                                const std::vector<std::string>& sets,
                                const std::optional<std::string>& out);

/// Runs one experiment, writing its artifacts into config.out. Returns an exit
/// code; progress and errors go to `log`.
int run_experiment(const ExperimentConfig& config, std::ostream& log);

void list_experiments(std::ostream& os);

/// Derivative, adjoint and metric self-checks on all benchmark problems.
int run_self_check(std::ostream& os);

}  // namespace seqhom
