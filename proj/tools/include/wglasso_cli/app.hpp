#pragma once

#include <filesystem>
#include <iosfwd>

#include "wglasso_cli/run_config.hpp"

namespace wgl::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitVerification = 4,
};

inline constexpr const char* kGeometryFile = "geometry.json";
inline constexpr const char* kInverseGridFile = "inverse_grid.json";
inline constexpr const char* kTrueGridFile = "true_grid.json";
/// Stem of lead_field.bin / lead_field.json.
inline constexpr const char* kLeadFieldStem = "lead_field";
inline constexpr const char* kSummaryFile = "summary.json";
inline constexpr const char* kTrialsFile = "trials.csv";

/// Missing or unreadable inputs of `solve` (exit code 2).
class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes geometry, both grids (planted sources and measurement live in the
/// true-grid file) and the inverse lead field into `out_dir`.
void cmd_generate(const RunConfig& config, const std::filesystem::path& out_dir);

/// Solves the generated data in `data_dir` with config's weighting; fixed
/// alpha when config.alpha is set, Morozov otherwise.
json cmd_solve(const RunConfig& config, const std::filesystem::path& data_dir);

struct VerifyOutcome {
  json report;
  bool ok = false;
};
VerifyOutcome cmd_verify(const RunConfig& config);

/// Runs the experiment and writes summary.json and trials.csv.
ExperimentReport cmd_experiment(const RunConfig& config, const std::filesystem::path& out_dir);

/// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wgl::cli
