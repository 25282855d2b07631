#include "wglasso_cli/app.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "wglasso/forward.hpp"
#include "wglasso/io.hpp"
#include "wglasso/metrics.hpp"
#include "wglasso/solver.hpp"
#include "wglasso/theory.hpp"
#include "wglasso/weighting.hpp"

namespace wgl::cli {

namespace fs = std::filesystem;

namespace {

json dipole_json(const DipoleSource& s) {
  return {{"group_id", s.group_id()}, {"position_mm", io::to_json(s.position())}, {"moment", io::to_json(s.moment())}};
}

json provenance(const RunConfig& config) { return {{"config", to_json(config)}, {"seed", config.seed}}; }

json read_input(const fs::path& path) {
  if (!fs::exists(path)) throw MissingInputError("missing input file " + path.string());
  return io::read_json(path);
}

}  // namespace

void cmd_generate(const RunConfig& config, const fs::path& out_dir) {
  config.validate();
  const ExperimentConfig& e = config.experiment;
  const ExperimentSetup setup = build_experiment_setup(e, config.seed);
  const std::vector<DipoleSource> sources = draw_trial_sources(e, setup, derive_seed(config.seed, 3));
  const LeadField inverse_field = build_lead_field(setup.inverse);
  const LeadField forward_field = e.sources_on_inverse_grid ? inverse_field : build_lead_field(setup.truth);
  const MeasurementSet data = simulate_measurement(forward_field, sources, e.noise_level, derive_seed(config.seed, 4));

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io::IoError("cannot create " + out_dir.string() + ": " + ec.message());

  json geometry = provenance(config);
  json head = io::to_json(setup.inverse);
  head.erase("sources_mm");
  geometry["geometry"] = head;
  io::write_json(out_dir / kGeometryFile, geometry);

  json inverse = provenance(config);
  inverse["grid_seed"] = setup.inverse_seed;
  inverse["positions_mm"] = io::to_json(setup.inverse.sources);
  io::write_json(out_dir / kInverseGridFile, inverse);

  json truth = provenance(config);
  truth["grid_seed"] = setup.true_seed;
  truth["positions_mm"] = io::to_json(setup.truth.sources);
  truth["sources_on"] = e.sources_on_inverse_grid ? "inverse_grid" : "true_grid";
  json planted = json::array();
  for (const auto& s : sources) planted.push_back(dipole_json(s));
  truth["planted_sources"] = planted;
  truth["measurement"] = io::to_json(data);
  io::write_json(out_dir / kTrueGridFile, truth);

  json header = provenance(config);
  header["grid"] = "inverse";
  io::write_lead_field(out_dir / kLeadFieldStem, inverse_field, ColumnLayout::kComponentMajor, header);
}

json cmd_solve(const RunConfig& config, const fs::path& data_dir) {
  config.validate();
  const json inverse = read_input(data_dir / kInverseGridFile);
  const json truth = read_input(data_dir / kTrueGridFile);
  const fs::path stem = data_dir / kLeadFieldStem;
  if (!fs::exists(stem.string() + ".bin") || !fs::exists(stem.string() + ".json")) {
    throw MissingInputError("missing lead field " + stem.string() + ".{bin,json}");
  }
  const LeadField lead_field = io::read_lead_field(stem);
  std::vector<Vec3> grid;
  MeasurementSet data;
  try {
    grid = io::points_from_json(inverse.at("positions_mm"));
    data = io::measurement_from_json(truth.at("measurement"));
  } catch (const json::exception& ex) {
    throw io::IoError(std::string("malformed data files: ") + ex.what());
  }
  if (lead_field.cols() != 3 * static_cast<Index>(grid.size()) || lead_field.rows() != data.noisy.size()) {
    throw io::IoError("lead field, grid and measurement dimensions disagree");
  }

  const ExperimentConfig& e = config.experiment;
  const GroupStructure groups = make_dipole_groups(static_cast<Index>(grid.size()));
  const Index m = lead_field.rows();
  const Index k = e.truncation_rank > 0 ? e.truncation_rank : default_truncation_rank(m);
  const WeightingOperator B = e.weighting == WeightingKind::kIdentity ? identity_weighting(m)
                                                                       : truncated_pseudoinverse(lead_field.entries, k);
  const ProblemInstance problem = compose_problem(lead_field.entries, B, data.noisy, groups);
  const double top = alpha_max(problem);

  json doc = provenance(config);
  doc["data_seed"] = truth.value("seed", json(nullptr));
  doc["weighting"] = to_string(e.weighting);
  doc["truncation_rank"] = B.k;
  doc["alpha_max"] = top;

  SolveResult result;
  if (config.alpha) {
    result = bcd_solve(problem, *config.alpha, Vector::Zero(problem.cols()), e.solver);
    doc["selection"] = "fixed";
    doc["morozov"] = nullptr;
  } else {
    ExperimentConfig target = e;
    target.noise_level = data.noise_level;
    const double delta = discrepancy_target(target, data);
    const MorozovResult selected = morozov_select_alpha(problem, delta, e.morozov, e.solver);
    result = selected.result;
    doc["selection"] = "morozov";
    doc["morozov"] = {{"delta", delta},
                      {"delta_mode", to_string(e.delta_mode)},
                      {"tau", e.morozov.tau},
                      {"bracket", {delta, e.morozov.tau * delta}},
                      {"flag", selected.flag},
                      {"in_bracket", selected.in_bracket},
                      {"solves", selected.solves}};
  }
  json dipoles = json::array();
  for (const auto& d : extract_dipoles(result.x, groups, grid, e.sources_per_trial)) {
    dipoles.push_back({{"group_id", d.group_id},
                       {"position_mm", io::to_json(d.position)},
                       {"moment", io::to_json(d.moment)},
                       {"amplitude", d.amplitude}});
  }
  doc["dipoles"] = dipoles;
  doc["result"] = io::to_json(result);
  return doc;
}

VerifyOutcome cmd_verify(const RunConfig& config) {
  config.validate();
  TheoremSuiteOptions options;
  options.seeds = config.verify_seeds;
  options.master_seed = config.seed;
  options.include_degenerate = config.verify_degenerate;
  options.solver = config.experiment.solver;
  const TheoremSuiteResult suite = run_theorem_suite(options);

  json cases = json::array();
  std::map<std::string, std::map<std::string, int>> table;
  for (const auto& c : suite.cases) {
    json entry = io::to_json(c.report);
    entry["informational"] = c.informational;
    cases.push_back(entry);
    ++table[c.report.theorem_id][c.informational ? "informational" : to_string(c.report.verdict)];
  }
  VerifyOutcome out;
  out.ok = suite.ok();
  out.report = provenance(config);
  out.report["summary"] = {{"passed", suite.passed},
                           {"failed", suite.failed},
                           {"informational", suite.informational},
                           {"ok", suite.ok()},
                           {"by_theorem", table}};
  out.report["cases"] = cases;
  return out;
}

ExperimentReport cmd_experiment(const RunConfig& config, const fs::path& out_dir) {
  config.validate();
  ExperimentReport report = run_experiment(config.experiment, config.seed);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io::IoError("cannot create " + out_dir.string() + ": " + ec.message());
  json summary = io::summary_json(report);
  summary["run_config"] = to_json(config);
  summary["seed"] = config.seed;
  io::write_json(out_dir / kSummaryFile, summary);
  std::ostringstream csv;
  io::write_trial_csv(csv, report.rows);
  io::write_text(out_dir / kTrialsFile, csv.str());
  return report;
}

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> electrodes;
  std::optional<int> inverse_positions;
  std::optional<int> true_positions;
  std::optional<std::string> weighting;
  std::optional<Index> k;
  std::optional<int> max_sweeps;
  std::optional<double> tau;
  std::optional<std::string> delta_mode;
  std::optional<double> noise;
  std::optional<int> trials;
  std::optional<int> sources;
  std::optional<bool> comparison;
  std::optional<bool> on_inverse_grid;
  std::optional<int> threads;
  std::optional<double> alpha;
  std::optional<int> verify_seeds;
};

void add_overrides(CLI::App& cmd, Overrides& o) {
  const RunConfig d;
  const ExperimentConfig& e = d.experiment;
  cmd.add_option("-c,--config", o.config_path, "JSON run config (unknown keys rejected)")->check(CLI::ExistingFile);
  cmd.add_option("--seed", o.seed, fmt::format("master seed [{}]", d.seed));
  cmd.add_option("--electrodes", o.electrodes, fmt::format("electrode count [{}]", e.electrodes));
  cmd.add_option("--inverse-positions", o.inverse_positions,
                 fmt::format("inverse grid positions [{}]", e.inverse_positions));
  cmd.add_option("--true-positions", o.true_positions, fmt::format("true grid positions [{}]", e.true_positions));
  cmd.add_option("--weighting", o.weighting,
                 fmt::format("identity | truncated_pseudoinverse [{}]", to_string(e.weighting)));
  cmd.add_option("-k,--rank", o.k, "truncation rank, 0 = round(150*m/228) [0]");
  cmd.add_option("--max-sweeps", o.max_sweeps, fmt::format("BCD sweep limit [{}]", e.solver.max_sweeps));
  cmd.add_option("--tau", o.tau, fmt::format("Morozov safety factor [{}]", e.morozov.tau));
  cmd.add_option("--delta-mode", o.delta_mode, fmt::format("known_noise | estimated [{}]", to_string(e.delta_mode)));
  cmd.add_option("--noise", o.noise, fmt::format("relative noise level [{}]", e.noise_level));
  cmd.add_option("--trials", o.trials, fmt::format("experiment trials [{}]", e.trials));
  cmd.add_option("--sources", o.sources, fmt::format("sources per trial [{}]", e.sources_per_trial));
  cmd.add_option("--comparison", o.comparison, fmt::format("run both weightings [{}]", e.comparison));
  cmd.add_option("--on-inverse-grid", o.on_inverse_grid,
                 fmt::format("place sources on the inverse grid [{}]", e.sources_on_inverse_grid));
  cmd.add_option("--threads", o.threads, fmt::format("trial worker threads, 0 = all cores [{}]", e.threads));
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : run_config_from_json(io::read_json(o.config_path));
  ExperimentConfig& e = c.experiment;
  if (o.seed) c.seed = *o.seed;
  if (o.electrodes) e.electrodes = *o.electrodes;
  if (o.inverse_positions) e.inverse_positions = *o.inverse_positions;
  if (o.true_positions) e.true_positions = *o.true_positions;
  try {
    if (o.weighting) e.weighting = weighting_kind_from_string(*o.weighting);
    if (o.delta_mode) e.delta_mode = delta_mode_from_string(*o.delta_mode);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  if (o.k) e.truncation_rank = *o.k;
  if (o.max_sweeps) e.solver.max_sweeps = *o.max_sweeps;
  if (o.tau) e.morozov.tau = *o.tau;
  if (o.noise) e.noise_level = *o.noise;
  if (o.trials) e.trials = *o.trials;
  if (o.sources) e.sources_per_trial = *o.sources;
  if (o.comparison) e.comparison = *o.comparison;
  if (o.on_inverse_grid) e.sources_on_inverse_grid = *o.on_inverse_grid;
  if (o.threads) e.threads = *o.threads;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.verify_seeds) c.verify_seeds = *o.verify_seeds;
  c.validate();
  return c;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Weighted Group Lasso source recovery"};
  app.footer(describe_defaults() +
             "Exit codes: 0 ok, 2 usage or validation, 3 IO, 4 verification failure.");
  app.require_subcommand(1);

  Overrides o;
  fs::path out_path;
  fs::path data_dir;

  auto* generate = app.add_subcommand("generate", "Write geometry, grids, planted sources and the lead field");
  add_overrides(*generate, o);
  generate->add_option("-o,--out", out_path, "output directory")->required();

  auto* solve = app.add_subcommand("solve", "Solve generated data; Morozov alpha unless --alpha is given");
  add_overrides(*solve, o);
  solve->add_option("-d,--data", data_dir, "directory written by generate")->required();
  solve->add_option("-o,--out", out_path, "result JSON path")->required();
  solve->add_option("--alpha", o.alpha, "fixed regularization parameter [Morozov]");

  auto* verify = app.add_subcommand("verify", "Run the recovery-theorem suite; exit 4 if any case fails");
  add_overrides(*verify, o);
  verify->add_option("-o,--out", out_path, "report JSON path");
  verify->add_option("--seeds", o.verify_seeds, fmt::format("seeds per theorem family [{}]", RunConfig{}.verify_seeds));

  auto* experiment = app.add_subcommand("experiment", "Run randomized trials; writes summary.json and trials.csv");
  add_overrides(*experiment, o);
  experiment->add_option("-o,--out", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig config = resolve(o);
    if (generate->parsed()) {
      cmd_generate(config, out_path);
      out << fmt::format("wrote 5 files to {}\n", out_path.string());
    } else if (solve->parsed()) {
      const json doc = cmd_solve(config, data_dir);
      io::write_json(out_path, doc);
      const json& r = doc.at("result");
      out << fmt::format("alpha {} discrepancy {} converged {} -> {}\n", r.at("alpha").get<double>(),
                         r.at("discrepancy_original").get<double>(), r.at("converged").get<bool>(),
                         out_path.string());
    } else if (verify->parsed()) {
      const VerifyOutcome outcome = cmd_verify(config);
      if (!out_path.empty()) io::write_json(out_path, outcome.report);
      for (const auto& [theorem, counts] : outcome.report.at("summary").at("by_theorem").items()) {
        out << fmt::format("{:<26}", theorem);
        for (const auto& [verdict, n] : counts.items()) out << fmt::format(" {}={}", verdict, n.get<int>());
        out << '\n';
      }
      out << (outcome.ok ? "verify: all cases passed\n" : "verify: FAILED\n");
      return outcome.ok ? kExitOk : kExitVerification;
    } else if (experiment->parsed()) {
      const ExperimentReport report = cmd_experiment(config, out_path);
      for (const auto& s : report.summary) {
        out << fmt::format("{:<24} mean DLE {:.4f} mm  median {:.4f} mm  mean DOE {:.4f} rad  ({} / {} matched)\n",
                           to_string(s.weighting), s.mean_dle_mm, s.median_dle_mm, s.mean_doe_rad, s.matched, s.rows);
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const MissingInputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const io::IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const RankError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace wgl::cli
