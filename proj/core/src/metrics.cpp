#include "wglasso/metrics.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

namespace wgl {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::vector<EstimatedDipole> extract_dipoles(const Vector& x, const GroupStructure& groups,
                                             std::span<const Vec3> positions, int count) {
  if (count < 1) throw std::invalid_argument("extract_dipoles: count must be at least 1");
  if (static_cast<std::size_t>(groups.size()) != positions.size()) {
    throw std::invalid_argument("extract_dipoles: one position per group required");
  }
  std::vector<std::pair<double, Index>> ranked;
  for (Index g = 0; g < groups.size(); ++g) {
    if (groups.group_size(g) != 3) throw std::invalid_argument("extract_dipoles: dipole groups have three members");
    const double amp = subvector(x, groups[g]).norm();
    if (amp > 0.0) ranked.emplace_back(amp, g);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<EstimatedDipole> out;
  for (std::size_t k = 0; k < ranked.size() && static_cast<int>(k) < count; ++k) {
    const Index g = ranked[k].second;
    EstimatedDipole d;
    d.group_id = g;
    d.position = positions[static_cast<std::size_t>(g)];
    d.moment = subvector(x, groups[g]);
    d.amplitude = ranked[k].first;
    out.push_back(d);
  }
  return out;
}

double dle(const Vec3& true_position, const Vec3& estimated_position) {
  return (true_position - estimated_position).norm();
}

double doe(const Vec3& true_moment, const Vec3& estimated_moment) {
  const double a = true_moment.norm();
  const double b = estimated_moment.norm();
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("doe: zero moment");
  const double c = std::clamp(true_moment.dot(estimated_moment) / (a * b), -1.0, 1.0);
  return std::acos(c);
}

SourceMatching match_sources(std::span<const Vec3> true_positions, std::span<const Vec3> estimated_positions) {
  if (true_positions.size() > 4 || estimated_positions.size() > 4) {
    throw std::invalid_argument("match_sources: at most 4 sources per side");
  }
  const std::size_t slots = std::max(true_positions.size(), estimated_positions.size());
  std::vector<int> perm(slots, -1);
  std::iota(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(estimated_positions.size()), 0);
  std::sort(perm.begin(), perm.end());

  SourceMatching best;
  best.total_dle = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < true_positions.size(); ++i) {
      if (perm[i] >= 0) total += dle(true_positions[i], estimated_positions[static_cast<std::size_t>(perm[i])]);
    }
    if (total < best.total_dle) {
      best.total_dle = total;
      best.assignment.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(true_positions.size()));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (true_positions.empty()) best.total_dle = 0.0;
  return best;
}

double depth(const Vec3& position, double scalp_radius) {
  const double r = position.norm();
  if (r > scalp_radius) throw std::invalid_argument("depth: position outside the scalp sphere");
  return scalp_radius - r;
}

double theoretical_min_dle(const Vec3& true_position, std::span<const Vec3> grid) {
  if (grid.empty()) throw std::invalid_argument("theoretical_min_dle: empty grid");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : grid) best = std::min(best, dle(true_position, p));
  return best;
}

std::string to_string(DeltaMode mode) { return mode == DeltaMode::kKnownNoise ? "known_noise" : "estimated"; }

DeltaMode delta_mode_from_string(const std::string& tag) {
  if (tag == "known_noise") return DeltaMode::kKnownNoise;
  if (tag == "estimated") return DeltaMode::kEstimated;
  throw std::invalid_argument("unknown delta mode '" + tag + "'");
}

void ExperimentConfig::validate() const {
  if (electrodes < 4) throw std::invalid_argument("experiment: need at least 4 electrodes");
  if (inverse_positions < 1 || true_positions < 1) throw std::invalid_argument("experiment: grids must be non-empty");
  if (3 * inverse_positions <= electrodes) {
    throw std::invalid_argument("experiment: inverse grid must give more unknowns than electrodes");
  }
  if (trials < 0) throw std::invalid_argument("experiment: negative trial count");
  if (sources_per_trial < 1 || sources_per_trial > 4) {
    throw std::invalid_argument("experiment: sources_per_trial must lie in [1, 4]");
  }
  if (noise_level < 0.0) throw std::invalid_argument("experiment: negative noise level");
  if (!(delta_floor > 0.0)) throw std::invalid_argument("experiment: delta_floor must be positive");
  if (truncation_rank < 0 || truncation_rank > electrodes) {
    throw std::invalid_argument("experiment: truncation rank must lie in [0, electrodes]");
  }
  if (threads < 0) throw std::invalid_argument("experiment: negative thread count");
  solver.validate();
}

std::vector<WeightingKind> ExperimentConfig::weightings() const {
  if (comparison) return {WeightingKind::kIdentity, WeightingKind::kTruncatedPseudoinverse};
  return {weighting};
}

Index ExperimentConfig::resolved_truncation_rank() const {
  return truncation_rank > 0 ? truncation_rank : default_truncation_rank(electrodes);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

ExperimentSetup build_experiment_setup(const ExperimentConfig& config, std::uint64_t master_seed) {
  config.validate();
  ExperimentSetup setup;
  setup.inverse_seed = derive_seed(master_seed, 1);
  setup.true_seed = derive_seed(master_seed, 2);

  HeadGeometry base;
  base.scalp_radius = config.scalp_radius;
  base.source_shell_fraction = config.source_shell_fraction;
  base.conductivity = config.conductivity;
  base.electrodes = place_electrodes(config.electrodes, config.scalp_radius);

  GridConstraints inverse;
  inverse.ball_radius = base.source_radius();
  inverse.min_separation = config.min_separation;
  setup.inverse = base;
  setup.inverse.sources = sample_source_grid(config.inverse_positions, inverse, setup.inverse_seed);

  GridConstraints truth = inverse;
  truth.min_electrode_distance = config.min_electrode_distance;
  truth.electrodes = base.electrodes;
  truth.exclude = setup.inverse.sources;
  setup.truth = base;
  setup.truth.sources = sample_source_grid(config.true_positions, truth, setup.true_seed);
  return setup;
}

bool TrialRow::matched() const { return std::isfinite(dle_mm); }

std::vector<WeightingSummary> summarize_rows(const std::vector<TrialRow>& rows) {
  std::vector<WeightingSummary> out;
  for (WeightingKind kind : {WeightingKind::kIdentity, WeightingKind::kTruncatedPseudoinverse}) {
    WeightingSummary s;
    s.weighting = kind;
    std::vector<double> dles;
    double doe_sum = 0.0;
    double min_sum = 0.0;
    for (const auto& row : rows) {
      if (row.weighting != kind) continue;
      ++s.rows;
      s.converged += row.converged ? 1 : 0;
      s.in_bracket += row.in_bracket ? 1 : 0;
      if (!row.matched()) continue;
      ++s.matched;
      dles.push_back(row.dle_mm);
      doe_sum += row.doe_rad;
      min_sum += row.theoretical_min_dle_mm;
    }
    if (s.rows == 0) continue;
    if (s.matched > 0) {
      s.mean_dle_mm = std::accumulate(dles.begin(), dles.end(), 0.0) / s.matched;
      s.mean_doe_rad = doe_sum / s.matched;
      s.mean_theoretical_min_dle_mm = min_sum / s.matched;
      std::sort(dles.begin(), dles.end());
      const std::size_t mid = dles.size() / 2;
      s.median_dle_mm = dles.size() % 2 == 1 ? dles[mid] : 0.5 * (dles[mid - 1] + dles[mid]);
    } else {
      s.mean_dle_mm = s.median_dle_mm = s.mean_doe_rad = s.mean_theoretical_min_dle_mm = kNaN;
    }
    out.push_back(s);
  }
  return out;
}

std::vector<DipoleSource> draw_trial_sources(const ExperimentConfig& config, const ExperimentSetup& setup,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& pool = config.sources_on_inverse_grid ? setup.inverse.sources : setup.truth.sources;
  if (static_cast<int>(pool.size()) < config.sources_per_trial) {
    throw std::invalid_argument("experiment: grid smaller than sources_per_trial");
  }

  std::vector<Index> chosen;
  std::uniform_int_distribution<Index> pick(0, static_cast<Index>(pool.size()) - 1);
  while (static_cast<int>(chosen.size()) < config.sources_per_trial) {
    const Index j = pick(rng);
    if (std::find(chosen.begin(), chosen.end(), j) == chosen.end()) chosen.push_back(j);
  }
  std::normal_distribution<double> normal;
  std::vector<DipoleSource> sources;
  for (Index j : chosen) {
    Vec3 q;
    do {
      q = Vec3(normal(rng), normal(rng), normal(rng));
    } while (q.norm() < 1e-3);
    sources.emplace_back(pool[static_cast<std::size_t>(j)], q.normalized(), j);
  }
  return sources;
}

double discrepancy_target(const ExperimentConfig& config, const MeasurementSet& data) {
  const double estimate =
      config.delta_mode == DeltaMode::kKnownNoise ? data.noise().norm() : config.noise_level * data.noisy.norm();
  return std::max(estimate, config.delta_floor * data.noisy.norm());
}

namespace {

struct Bench {
  WeightingKind kind;
  WeightingOperator B;
  ProblemInstance problem;
};

std::vector<TrialRow> run_trial(const ExperimentConfig& config, const ExperimentSetup& setup,
                                const LeadField& forward_field, const std::vector<Bench>& benches,
                                const GroupStructure& groups, int trial, std::uint64_t master_seed) {
  const std::uint64_t seed = derive_seed(master_seed, 1000 + static_cast<std::uint64_t>(trial));
  const std::vector<DipoleSource> sources = draw_trial_sources(config, setup, seed);
  const MeasurementSet data =
      simulate_measurement(forward_field, sources, config.noise_level, derive_seed(seed, 1));
  const double delta = discrepancy_target(config, data);

  std::vector<Vec3> true_positions;
  for (const auto& s : sources) true_positions.push_back(s.position());

  std::vector<TrialRow> rows;
  for (const auto& bench : benches) {
    std::vector<TrialRow> block(sources.size());
    for (std::size_t k = 0; k < sources.size(); ++k) {
      auto& row = block[k];
      row.trial = trial;
      row.weighting = bench.kind;
      row.source_idx = static_cast<int>(k);
      row.true_position = sources[k].position();
      row.true_moment = sources[k].moment();
      row.estimated_position = row.estimated_moment = Vec3::Constant(kNaN);
      row.dle_mm = row.doe_rad = row.estimated_depth_mm = kNaN;
      row.true_depth_mm = depth(row.true_position, config.scalp_radius);
      row.theoretical_min_dle_mm = theoretical_min_dle(row.true_position, setup.inverse.sources);
      row.delta = delta;
    }
    try {
      const ProblemInstance problem = rebind_measurement(bench.problem, bench.B, data.noisy);
      const MorozovResult selected = morozov_select_alpha(problem, delta, config.morozov, config.solver);
      const auto estimates =
          extract_dipoles(selected.result.x, groups, setup.inverse.sources, config.sources_per_trial);
      std::vector<Vec3> est_positions;
      for (const auto& e : estimates) est_positions.push_back(e.position);
      const SourceMatching matching = match_sources(true_positions, est_positions);
      for (std::size_t k = 0; k < sources.size(); ++k) {
        auto& row = block[k];
        row.alpha = selected.alpha;
        row.discrepancy = selected.result.discrepancy_original;
        row.converged = selected.result.converged;
        row.in_bracket = selected.in_bracket;
        row.morozov_flag = selected.flag;
        const int e = matching.assignment[k];
        if (e < 0) continue;
        const auto& est = estimates[static_cast<std::size_t>(e)];
        row.estimated_position = est.position;
        row.estimated_moment = est.moment;
        row.dle_mm = dle(row.true_position, est.position);
        row.doe_rad = doe(row.true_moment, est.moment);
        row.estimated_depth_mm = depth(est.position, config.scalp_radius);
      }
    } catch (const std::exception& ex) {
      for (auto& row : block) row.error = ex.what();
    }
    rows.insert(rows.end(), block.begin(), block.end());
  }
  return rows;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, std::uint64_t master_seed) {
  const ExperimentSetup setup = build_experiment_setup(config, master_seed);
  const GroupStructure groups = make_dipole_groups(config.inverse_positions);
  const LeadField inverse_field = build_lead_field(setup.inverse);
  const LeadField forward_field = config.sources_on_inverse_grid ? inverse_field : build_lead_field(setup.truth);

  ExperimentReport report;
  report.config = config;
  report.master_seed = master_seed;
  report.truncation_rank = config.resolved_truncation_rank();

  const Vector zero = Vector::Zero(inverse_field.rows());
  std::vector<Bench> benches;
  for (WeightingKind kind : config.weightings()) {
    WeightingOperator B = kind == WeightingKind::kIdentity
                              ? identity_weighting(inverse_field.rows())
                              : truncated_pseudoinverse(inverse_field.entries, report.truncation_rank);
    ProblemInstance problem = compose_problem(inverse_field.entries, B, zero, groups);
    benches.push_back({kind, std::move(B), std::move(problem)});
  }

  std::vector<std::vector<TrialRow>> per_trial(static_cast<std::size_t>(config.trials));
  const auto work = [&](int t) {
    per_trial[static_cast<std::size_t>(t)] =
        run_trial(config, setup, forward_field, benches, groups, t, master_seed);
  };
  int threads = config.threads == 0 ? static_cast<int>(std::thread::hardware_concurrency()) : config.threads;
  threads = std::clamp(threads, 1, std::max(1, config.trials));
  if (threads == 1) {
    for (int t = 0; t < config.trials; ++t) work(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (int t = next++; t < config.trials; t = next++) work(t);
      });
    }
  }
  for (auto& rows : per_trial) report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  report.summary = summarize_rows(report.rows);
  return report;
}

}  // namespace wgl
