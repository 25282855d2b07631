#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "wglasso/metrics.hpp"

namespace wgl::cli {

using nlohmann::json;

/// Malformed or semantically invalid configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::uint64_t seed = 42;
  /// Geometry, weighting, solver, Morozov and experiment settings.
  ExperimentConfig experiment;
  /// `solve`: fixed alpha; Morozov selection when unset.
  std::optional<double> alpha;
  /// `verify`: seeds per theorem family.
  int verify_seeds = 20;
  bool verify_degenerate = true;

  void validate() const;
};

/// Sections: seed, geometry, weighting, solver, morozov, experiment, solve,
/// verify. Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const json& j);
json to_json(const RunConfig& config);

/// Human-readable table of every default, for --help.
std::string describe_defaults();

}  // namespace wgl::cli
