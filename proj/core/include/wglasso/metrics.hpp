#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wglasso/core_model.hpp"
#include "wglasso/forward.hpp"
#include "wglasso/solver.hpp"
#include "wglasso/weighting.hpp"

namespace wgl {

struct EstimatedDipole {
  Index group_id = -1;
  Vec3 position = Vec3::Zero();
  Vec3 moment = Vec3::Zero();
  double amplitude = 0.0;
};

/// Top `count` groups by ||x_g||, ties broken by group id. Groups must have
/// three members and map to `positions` by group id.
std::vector<EstimatedDipole> extract_dipoles(const Vector& x, const GroupStructure& groups,
                                             std::span<const Vec3> positions, int count);

/// Dipole localization error (mm).
double dle(const Vec3& true_position, const Vec3& estimated_position);
/// Dipole orientation error in [0, pi] radians.
double doe(const Vec3& true_moment, const Vec3& estimated_moment);

struct SourceMatching {
  /// For each true source, the matched estimate index or -1.
  std::vector<int> assignment;
  double total_dle = 0.0;
};

/// Exhaustive minimum-total-DLE assignment; both lists must hold at most 4.
SourceMatching match_sources(std::span<const Vec3> true_positions, std::span<const Vec3> estimated_positions);

/// Distance from `position` to the scalp sphere.
double depth(const Vec3& position, double scalp_radius);

double theoretical_min_dle(const Vec3& true_position, std::span<const Vec3> grid);

enum class DeltaMode { kKnownNoise, kEstimated };
std::string to_string(DeltaMode mode);
DeltaMode delta_mode_from_string(const std::string& tag);

struct ExperimentConfig {
  int electrodes = 64;
  double scalp_radius = kDefaultScalpRadiusMm;
  double source_shell_fraction = kDefaultSourceShellFraction;
  double conductivity = kDefaultConductivity;
  int inverse_positions = 600;
  int true_positions = 600;
  double min_separation = kDefaultMinSeparationMm;
  double min_electrode_distance = kDefaultMinElectrodeDistanceMm;

  int trials = 50;
  int sources_per_trial = 1;
  double noise_level = 0.01;
  /// Run both weightings on identical data.
  bool comparison = true;
  WeightingKind weighting = WeightingKind::kTruncatedPseudoinverse;
  /// 0 selects default_truncation_rank(electrodes).
  Index truncation_rank = 0;
  /// Draw true sources from the inverse grid (deliberate inverse crime, used
  /// for consistency checks).
  bool sources_on_inverse_grid = false;

  DeltaMode delta_mode = DeltaMode::kKnownNoise;
  /// delta is never below delta_floor * ||b||.
  double delta_floor = 1e-8;
  MorozovOptions morozov;
  SolverConfig solver;
  /// Worker threads for independent trials; 0 uses the hardware count.
  int threads = 1;

  void validate() const;
  std::vector<WeightingKind> weightings() const;
  Index resolved_truncation_rank() const;
};

/// Everything fixed across trials: electrodes and both source grids.
struct ExperimentSetup {
  HeadGeometry inverse;  // electrodes + inverse grid
  HeadGeometry truth;    // electrodes + true grid
  std::uint64_t inverse_seed = 0;
  std::uint64_t true_seed = 0;
};

/// Deterministic 64-bit stream seed from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

ExperimentSetup build_experiment_setup(const ExperimentConfig& config, std::uint64_t master_seed);

/// sources_per_trial distinct positions of the true grid (inverse grid when
/// sources_on_inverse_grid) with random unit moments; group ids index that
/// grid.
std::vector<DipoleSource> draw_trial_sources(const ExperimentConfig& config, const ExperimentSetup& setup,
                                             std::uint64_t seed);

/// Morozov delta for `data` under config.delta_mode, floored at
/// delta_floor * ||noisy||.
double discrepancy_target(const ExperimentConfig& config, const MeasurementSet& data);

struct TrialRow {
  int trial = 0;
  WeightingKind weighting = WeightingKind::kIdentity;
  int source_idx = 0;
  Vec3 true_position = Vec3::Zero();
  Vec3 true_moment = Vec3::Zero();
  /// NaN when no dipole was matched to this source.
  Vec3 estimated_position;
  Vec3 estimated_moment;
  double dle_mm = 0.0;
  double doe_rad = 0.0;
  double true_depth_mm = 0.0;
  double estimated_depth_mm = 0.0;
  double theoretical_min_dle_mm = 0.0;
  double alpha = 0.0;
  double discrepancy = 0.0;
  double delta = 0.0;
  bool converged = false;
  bool in_bracket = false;
  std::string morozov_flag;
  std::string error;

  bool matched() const;
};

struct WeightingSummary {
  WeightingKind weighting = WeightingKind::kIdentity;
  int rows = 0;
  int matched = 0;
  int converged = 0;
  int in_bracket = 0;
  double mean_dle_mm = 0.0;
  double median_dle_mm = 0.0;
  double mean_doe_rad = 0.0;
  double mean_theoretical_min_dle_mm = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::uint64_t master_seed = 0;
  Index truncation_rank = 0;
  std::vector<TrialRow> rows;
  std::vector<WeightingSummary> summary;
};

/// Means/medians over matched rows, one entry per weighting present.
std::vector<WeightingSummary> summarize_rows(const std::vector<TrialRow>& rows);

ExperimentReport run_experiment(const ExperimentConfig& config, std::uint64_t master_seed);

}  // namespace wgl
