#include "wglasso_cli/run_config.hpp"

#include <initializer_list>
#include <string_view>

#include <fmt/format.h>

#include "wglasso/io.hpp"

namespace wgl::cli {

namespace {

void require_object(const json& j, std::string_view where) {
  if (!j.is_object()) throw ConfigError(fmt::format("config: '{}' must be an object", where));
}

void reject_unknown(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(fmt::format("config: unknown key '{}' in '{}'", key, where));
  }
}

template <class T>
void read(const json& section, std::string_view where, const char* key, T& out) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("config: '{}.{}' has the wrong type", where, key));
  }
}

template <class T, class Parse>
void read_tag(const json& section, std::string_view where, const char* key, T& out, Parse parse) {
  std::string tag;
  if (!section.contains(key)) return;
  read(section, where, key, tag);
  try {
    out = parse(tag);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fmt::format("config: '{}.{}': {}", where, key, e.what()));
  }
}

}  // namespace

void RunConfig::validate() const {
  try {
    experiment.validate();
    experiment.solver.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const MorozovOptions& m = experiment.morozov;
  if (!(m.tau >= 1.0)) throw ConfigError("config: morozov.tau must be at least 1");
  if (m.max_bisections < 0) throw ConfigError("config: morozov.max_bisections must be non-negative");
  if (!(m.descent_factor > 0.0 && m.descent_factor < 1.0)) {
    throw ConfigError("config: morozov.descent_factor must lie in (0, 1)");
  }
  if (m.alpha_lo < 0.0 || m.alpha_hi < 0.0) throw ConfigError("config: morozov alpha bounds must be non-negative");
  if (alpha && !(*alpha > 0.0)) throw ConfigError("config: solve.alpha must be positive");
  if (verify_seeds < 1) throw ConfigError("config: verify.seeds must be at least 1");
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, "<root>",
                 {"seed", "geometry", "weighting", "solver", "morozov", "experiment", "solve", "verify"});
  RunConfig c;
  ExperimentConfig& e = c.experiment;
  read(j, "<root>", "seed", c.seed);

  if (j.contains("geometry")) {
    const json& g = j.at("geometry");
    reject_unknown(g, "geometry",
                   {"electrodes", "scalp_radius_mm", "source_shell_fraction", "conductivity_s_per_mm",
                    "inverse_positions", "true_positions", "min_separation_mm", "min_electrode_distance_mm"});
    read(g, "geometry", "electrodes", e.electrodes);
    read(g, "geometry", "scalp_radius_mm", e.scalp_radius);
    read(g, "geometry", "source_shell_fraction", e.source_shell_fraction);
    read(g, "geometry", "conductivity_s_per_mm", e.conductivity);
    read(g, "geometry", "inverse_positions", e.inverse_positions);
    read(g, "geometry", "true_positions", e.true_positions);
    read(g, "geometry", "min_separation_mm", e.min_separation);
    read(g, "geometry", "min_electrode_distance_mm", e.min_electrode_distance);
  }
  if (j.contains("weighting")) {
    const json& w = j.at("weighting");
    reject_unknown(w, "weighting", {"kind", "k"});
    read_tag(w, "weighting", "kind", e.weighting, weighting_kind_from_string);
    read(w, "weighting", "k", e.truncation_rank);
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    reject_unknown(s, "solver", {"tol_objective", "tol_x", "max_sweeps", "kkt_tol"});
    read(s, "solver", "tol_objective", e.solver.tol_objective);
    read(s, "solver", "tol_x", e.solver.tol_x);
    read(s, "solver", "max_sweeps", e.solver.max_sweeps);
    read(s, "solver", "kkt_tol", e.solver.kkt_tol);
  }
  if (j.contains("morozov")) {
    const json& m = j.at("morozov");
    reject_unknown(m, "morozov",
                   {"tau", "delta_mode", "delta_floor", "alpha_lo", "alpha_hi", "max_bisections", "descent_factor"});
    read(m, "morozov", "tau", e.morozov.tau);
    read_tag(m, "morozov", "delta_mode", e.delta_mode, delta_mode_from_string);
    read(m, "morozov", "delta_floor", e.delta_floor);
    read(m, "morozov", "alpha_lo", e.morozov.alpha_lo);
    read(m, "morozov", "alpha_hi", e.morozov.alpha_hi);
    read(m, "morozov", "max_bisections", e.morozov.max_bisections);
    read(m, "morozov", "descent_factor", e.morozov.descent_factor);
  }
  if (j.contains("experiment")) {
    const json& x = j.at("experiment");
    reject_unknown(x, "experiment",
                   {"trials", "sources_per_trial", "noise_level", "comparison", "sources_on_inverse_grid", "threads"});
    read(x, "experiment", "trials", e.trials);
    read(x, "experiment", "sources_per_trial", e.sources_per_trial);
    read(x, "experiment", "noise_level", e.noise_level);
    read(x, "experiment", "comparison", e.comparison);
    read(x, "experiment", "sources_on_inverse_grid", e.sources_on_inverse_grid);
    read(x, "experiment", "threads", e.threads);
  }
  if (j.contains("solve")) {
    const json& s = j.at("solve");
    reject_unknown(s, "solve", {"alpha"});
    if (s.contains("alpha") && !s.at("alpha").is_null()) {
      double a = 0.0;
      read(s, "solve", "alpha", a);
      c.alpha = a;
    }
  }
  if (j.contains("verify")) {
    const json& v = j.at("verify");
    reject_unknown(v, "verify", {"seeds", "include_degenerate"});
    read(v, "verify", "seeds", c.verify_seeds);
    read(v, "verify", "include_degenerate", c.verify_degenerate);
  }
  return c;
}

json to_json(const RunConfig& c) {
  const ExperimentConfig& e = c.experiment;
  return {{"seed", c.seed},
          {"geometry",
           {{"electrodes", e.electrodes},
            {"scalp_radius_mm", e.scalp_radius},
            {"source_shell_fraction", e.source_shell_fraction},
            {"conductivity_s_per_mm", e.conductivity},
            {"inverse_positions", e.inverse_positions},
            {"true_positions", e.true_positions},
            {"min_separation_mm", e.min_separation},
            {"min_electrode_distance_mm", e.min_electrode_distance}}},
          {"weighting", {{"kind", to_string(e.weighting)}, {"k", e.truncation_rank}}},
          {"solver", io::to_json(e.solver)},
          {"morozov",
           {{"tau", e.morozov.tau},
            {"delta_mode", to_string(e.delta_mode)},
            {"delta_floor", e.delta_floor},
            {"alpha_lo", e.morozov.alpha_lo},
            {"alpha_hi", e.morozov.alpha_hi},
            {"max_bisections", e.morozov.max_bisections},
            {"descent_factor", e.morozov.descent_factor}}},
          {"experiment",
           {{"trials", e.trials},
            {"sources_per_trial", e.sources_per_trial},
            {"noise_level", e.noise_level},
            {"comparison", e.comparison},
            {"sources_on_inverse_grid", e.sources_on_inverse_grid},
            {"threads", e.threads}}},
          {"solve", {{"alpha", c.alpha ? json(*c.alpha) : json(nullptr)}}},
          {"verify", {{"seeds", c.verify_seeds}, {"include_degenerate", c.verify_degenerate}}}};
}

std::string describe_defaults() {
  std::string out = "Config file defaults (JSON, every key optional):\n";
  const json defaults = to_json(RunConfig{});
  for (const auto& [section, body] : defaults.items()) {
    if (!body.is_object()) {
      out += fmt::format("  {} = {}\n", section, body.dump());
      continue;
    }
    for (const auto& [key, value] : body.items()) out += fmt::format("  {}.{} = {}\n", section, key, value.dump());
  }
  out += "weighting.k = 0 selects round(150 * electrodes / 228); solve.alpha = null selects Morozov.\n";
  return out;
}

}  // namespace wgl::cli
