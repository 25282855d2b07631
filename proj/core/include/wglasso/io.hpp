#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wglasso/core_model.hpp"
#include "wglasso/forward.hpp"
#include "wglasso/metrics.hpp"
#include "wglasso/solver.hpp"
#include "wglasso/theory.hpp"

namespace wgl::io {

using nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json to_json(const Vec3& v);
Vec3 vec3_from_json(const json& j);
json to_json(const std::vector<Vec3>& points);
std::vector<Vec3> points_from_json(const json& j);
json to_json(const Vector& v);
Vector vector_from_json(const json& j);

json to_json(const HeadGeometry& geometry);
/// Electrodes, radii and conductivity; `sources` read when present.
HeadGeometry geometry_from_json(const json& j);

json to_json(const MeasurementSet& m);
MeasurementSet measurement_from_json(const json& j);

json to_json(const SolverConfig& c);
json to_json(const MorozovOptions& o);
json to_json(const SolveResult& r);
json to_json(const TheoremReport& r);
json to_json(const ExperimentConfig& c);
json to_json(const WeightingSummary& s);
/// Summary document: config echo, seed and per-weighting statistics.
json summary_json(const ExperimentReport& report);

/// Fixed CSV header of per-trial rows.
extern const char* const kTrialCsvHeader;
void write_trial_csv(std::ostream& out, const std::vector<TrialRow>& rows);

/// Writes `<stem>.bin` (row-major little-endian float64, columns in `layout`)
/// and `<stem>.json` ({rows, cols, layout, dtype, byte_order}).
void write_lead_field(const std::filesystem::path& stem, const LeadField& lead_field,
                      ColumnLayout layout = ColumnLayout::kComponentMajor, const json& extra = json::object());
/// Reads a lead field written by write_lead_field and returns it
/// component-major.
LeadField read_lead_field(const std::filesystem::path& stem);

void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace wgl::io
