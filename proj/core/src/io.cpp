#include "wglasso/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <fmt/format.h>

namespace wgl::io {

namespace {

double number_or_nan(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return out;
  }
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw IoError("expected a 3-vector");
  return Vec3(number_or_nan(j[0]), number_or_nan(j[1]), number_or_nan(j[2]));
}

json to_json(const std::vector<Vec3>& points) {
  json out = json::array();
  for (const auto& p : points) out.push_back(to_json(p));
  return out;
}

std::vector<Vec3> points_from_json(const json& j) {
  if (!j.is_array()) throw IoError("expected an array of 3-vectors");
  std::vector<Vec3> out;
  out.reserve(j.size());
  for (const auto& p : j) out.push_back(vec3_from_json(p));
  return out;
}

json to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw IoError("expected an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = number_or_nan(j[i]);
  return v;
}

json to_json(const HeadGeometry& g) {
  return {{"scalp_radius_mm", g.scalp_radius},
          {"source_shell_fraction", g.source_shell_fraction},
          {"conductivity_s_per_mm", g.conductivity},
          {"electrodes_mm", to_json(g.electrodes)},
          {"sources_mm", to_json(g.sources)}};
}

HeadGeometry geometry_from_json(const json& j) {
  try {
    HeadGeometry g;
    g.scalp_radius = j.at("scalp_radius_mm").get<double>();
    g.source_shell_fraction = j.at("source_shell_fraction").get<double>();
    g.conductivity = j.at("conductivity_s_per_mm").get<double>();
    g.electrodes = points_from_json(j.at("electrodes_mm"));
    if (j.contains("sources_mm")) g.sources = points_from_json(j.at("sources_mm"));
    return g;
  } catch (const json::exception& e) {
    throw IoError(std::string("geometry: ") + e.what());
  }
}

json to_json(const MeasurementSet& m) {
  return {{"clean", to_json(m.clean)},
          {"noisy", to_json(m.noisy)},
          {"noise_level", m.noise_level},
          {"noise_seed", m.noise_seed}};
}

MeasurementSet measurement_from_json(const json& j) {
  try {
    MeasurementSet m;
    m.clean = vector_from_json(j.at("clean"));
    m.noisy = vector_from_json(j.at("noisy"));
    m.noise_level = j.at("noise_level").get<double>();
    m.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("measurement: ") + e.what());
  }
}

json to_json(const SolverConfig& c) {
  return {{"tol_objective", c.tol_objective},
          {"tol_x", c.tol_x},
          {"max_sweeps", c.max_sweeps},
          {"kkt_tol", c.kkt_tol}};
}

json to_json(const MorozovOptions& o) {
  return {{"tau", o.tau},
          {"alpha_lo", o.alpha_lo},
          {"alpha_hi", o.alpha_hi},
          {"max_bisections", o.max_bisections},
          {"descent_factor", o.descent_factor}};
}

json to_json(const SolveResult& r) {
  return {{"alpha", r.alpha},
          {"objective", r.objective},
          {"discrepancy_original", r.discrepancy_original},
          {"discrepancy_transformed", r.discrepancy_transformed},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"monotone", r.monotone},
          {"termination", r.termination},
          {"kkt_residual", r.kkt_residual},
          {"active_groups", r.active_groups},
          {"x", to_json(r.x)}};
}

json to_json(const TheoremReport& r) {
  json assumptions = json::array();
  for (const auto& a : r.assumptions_checked) {
    assumptions.push_back({{"assumption", a.name}, {"passed", a.passed}, {"margin", a.margin}});
  }
  json metrics = json::object();
  for (const auto& [name, value] : r.error_metrics) metrics[name] = value;
  return {{"theorem_id", r.theorem_id},
          {"instance",
           {{"rows", r.instance.rows},
            {"cols", r.instance.cols},
            {"num_groups", r.instance.num_groups},
            {"planted_groups", r.instance.planted_groups},
            {"seed", r.instance.seed}}},
          {"assumptions_checked", assumptions},
          {"verdict", to_string(r.verdict)},
          {"error_metrics", metrics},
          {"notes", r.notes}};
}

json to_json(const ExperimentConfig& c) {
  return {{"electrodes", c.electrodes},
          {"scalp_radius_mm", c.scalp_radius},
          {"source_shell_fraction", c.source_shell_fraction},
          {"conductivity_s_per_mm", c.conductivity},
          {"inverse_positions", c.inverse_positions},
          {"true_positions", c.true_positions},
          {"min_separation_mm", c.min_separation},
          {"min_electrode_distance_mm", c.min_electrode_distance},
          {"trials", c.trials},
          {"sources_per_trial", c.sources_per_trial},
          {"noise_level", c.noise_level},
          {"comparison", c.comparison},
          {"weighting", to_string(c.weighting)},
          {"truncation_rank", c.resolved_truncation_rank()},
          {"sources_on_inverse_grid", c.sources_on_inverse_grid},
          {"delta_mode", to_string(c.delta_mode)},
          {"delta_floor", c.delta_floor},
          {"morozov", to_json(c.morozov)},
          {"solver", to_json(c.solver)},
          {"threads", c.threads}};
}

json to_json(const WeightingSummary& s) {
  return {{"weighting", to_string(s.weighting)},
          {"rows", s.rows},
          {"matched", s.matched},
          {"converged", s.converged},
          {"in_bracket", s.in_bracket},
          {"mean_dle_mm", s.mean_dle_mm},
          {"median_dle_mm", s.median_dle_mm},
          {"mean_doe_rad", s.mean_doe_rad},
          {"mean_theoretical_min_dle_mm", s.mean_theoretical_min_dle_mm}};
}

json summary_json(const ExperimentReport& report) {
  json summary = json::array();
  for (const auto& s : report.summary) summary.push_back(to_json(s));
  std::size_t errors = 0;
  for (const auto& row : report.rows) errors += row.error.empty() ? 0 : 1;
  return {{"config", to_json(report.config)},
          {"master_seed", report.master_seed},
          {"truncation_rank", report.truncation_rank},
          {"rows", report.rows.size()},
          {"failed_rows", errors},
          {"summary", summary}};
}

const char* const kTrialCsvHeader =
    "trial,weighting,source_idx,true_x,true_y,true_z,est_x,est_y,est_z,dle_mm,doe_rad,true_depth_mm,"
    "est_depth_mm,alpha,discrepancy,converged";

void write_trial_csv(std::ostream& out, const std::vector<TrialRow>& rows) {
  out << kTrialCsvHeader << '\n';
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.trial, to_string(r.weighting),
                       r.source_idx, r.true_position.x(), r.true_position.y(), r.true_position.z(),
                       r.estimated_position.x(), r.estimated_position.y(), r.estimated_position.z(), r.dle_mm,
                       r.doe_rad, r.true_depth_mm, r.estimated_depth_mm, r.alpha, r.discrepancy,
                       r.converged ? "true" : "false");
  }
}

void write_lead_field(const std::filesystem::path& stem, const LeadField& lead_field, ColumnLayout layout,
                      const json& extra) {
  const Matrix cols = to_layout(from_layout(lead_field.entries, lead_field.layout), layout);
  std::ofstream bin(with_suffix(stem, ".bin"), std::ios::binary | std::ios::trunc);
  if (!bin) throw IoError("cannot open " + with_suffix(stem, ".bin").string() + " for writing");
  std::vector<char> buffer(static_cast<std::size_t>(cols.size()) * 8);
  std::size_t offset = 0;
  for (Index i = 0; i < cols.rows(); ++i) {
    for (Index j = 0; j < cols.cols(); ++j) {
      const auto bits = to_little_endian(std::bit_cast<std::uint64_t>(cols(i, j)));
      std::memcpy(buffer.data() + offset, &bits, 8);
      offset += 8;
    }
  }
  bin.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!bin) throw IoError("failed writing " + with_suffix(stem, ".bin").string());

  json header = extra;
  header["rows"] = cols.rows();
  header["cols"] = cols.cols();
  header["layout"] = to_string(layout);
  header["dtype"] = "float64";
  header["byte_order"] = "little";
  header["order"] = "row_major";
  write_json(with_suffix(stem, ".json"), header);
}

LeadField read_lead_field(const std::filesystem::path& stem) {
  const json header = read_json(with_suffix(stem, ".json"));
  Index rows = 0;
  Index cols = 0;
  ColumnLayout layout{};
  try {
    rows = header.at("rows").get<Index>();
    cols = header.at("cols").get<Index>();
    layout = column_layout_from_string(header.at("layout").get<std::string>());
  } catch (const json::exception& e) {
    throw IoError(std::string("lead field header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("lead field header: ") + e.what());
  }
  if (rows < 0 || cols < 0) throw IoError("lead field header: negative dimensions");
  std::ifstream bin(with_suffix(stem, ".bin"), std::ios::binary);
  if (!bin) throw IoError("cannot open " + with_suffix(stem, ".bin").string());
  std::vector<char> buffer(static_cast<std::size_t>(rows * cols) * 8);
  bin.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (bin.gcount() != static_cast<std::streamsize>(buffer.size()) || bin.peek() != std::char_traits<char>::eof()) {
    throw IoError("lead field binary size does not match header");
  }
  Matrix m(rows, cols);
  std::size_t offset = 0;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, buffer.data() + offset, 8);
      offset += 8;
      m(i, j) = std::bit_cast<double>(to_little_endian(bits));
    }
  }
  LeadField lf;
  lf.entries = from_layout(m, layout);
  lf.layout = ColumnLayout::kComponentMajor;
  return lf;
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace wgl::io
