#include "wglasso/forward.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace wgl {

void HeadGeometry::validate(double min_separation) const {
  if (!(scalp_radius > 0.0)) throw std::invalid_argument("HeadGeometry: scalp radius must be positive");
  if (!(conductivity > 0.0)) throw std::invalid_argument("HeadGeometry: conductivity must be positive");
  if (!(source_shell_fraction > 0.0 && source_shell_fraction < 1.0)) {
    throw std::invalid_argument("HeadGeometry: source shell fraction must lie in (0, 1)");
  }
  for (const auto& e : electrodes) {
    if (std::abs(e.norm() - scalp_radius) > 1e-9 * scalp_radius) {
      throw std::invalid_argument("HeadGeometry: electrode off the scalp sphere");
    }
  }
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (!(sources[i].norm() < scalp_radius)) throw std::invalid_argument("HeadGeometry: source outside the scalp");
    for (std::size_t j = 0; j < i; ++j) {
      if ((sources[i] - sources[j]).norm() < min_separation) {
        throw std::invalid_argument("HeadGeometry: sources " + std::to_string(j) + " and " + std::to_string(i) +
                                    " closer than the minimum separation");
      }
    }
  }
}

std::vector<Vec3> place_electrodes(int count, double radius) {
  if (count < 4) throw std::invalid_argument("place_electrodes: need at least 4 electrodes");
  if (!(radius > 0.0)) throw std::invalid_argument("place_electrodes: radius must be positive");
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * i;
    Vec3 p(rho * std::cos(phi), rho * std::sin(phi), z);
    out.push_back(radius * p.normalized());
  }
  return out;
}

std::vector<Vec3> sample_source_grid(int count, const GridConstraints& constraints, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_source_grid: count must be at least 1");
  if (constraints.min_separation < 0.0 || constraints.min_electrode_distance < 0.0) {
    throw std::invalid_argument("sample_source_grid: distances must be non-negative");
  }
  if (!(constraints.ball_radius > 0.0)) throw std::invalid_argument("sample_source_grid: ball radius must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-constraints.ball_radius, constraints.ball_radius);
  const double r2 = constraints.ball_radius * constraints.ball_radius;
  const double sep2 = constraints.min_separation * constraints.min_separation;
  const double clear2 = constraints.min_electrode_distance * constraints.min_electrode_distance;

  // rejection tallies: electrode clearance, separation, exclusion
  std::array<std::size_t, 3> rejected{};
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(count));
  std::size_t attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (attempts++ >= constraints.max_attempts) {
      static constexpr std::array<const char*, 3> kNames = {"min_electrode_distance", "min_separation", "exclude"};
      const auto worst = static_cast<std::size_t>(std::distance(
          rejected.begin(), std::max_element(rejected.begin(), rejected.end())));
      throw CapacityError(kNames[worst], "sample_source_grid: placed " + std::to_string(out.size()) + " of " +
                                             std::to_string(count) + " points after " +
                                             std::to_string(constraints.max_attempts) +
                                             " attempts; constraint '" + kNames[worst] + "' unsatisfiable");
    }
    Vec3 p;
    do {
      p = Vec3(coord(rng), coord(rng), coord(rng));
    } while (p.squaredNorm() >= r2);

    const auto too_close = [&](std::span<const Vec3> set, double limit2, bool strict) {
      return std::any_of(set.begin(), set.end(), [&](const Vec3& q) {
        const double d2 = (p - q).squaredNorm();
        return strict ? d2 <= limit2 : d2 < limit2;
      });
    };
    if (clear2 > 0.0 && too_close(constraints.electrodes, clear2, false)) {
      ++rejected[0];
      continue;
    }
    if (sep2 > 0.0 && too_close(out, sep2, false)) {
      ++rejected[1];
      continue;
    }
    if (too_close(constraints.exclude, 0.0, true)) {
      ++rejected[2];
      continue;
    }
    out.push_back(p);
  }
  return out;
}

Matrix dipole_lead_columns_unreferenced(std::span<const Vec3> electrodes, const Vec3& r0, double conductivity) {
  if (!(conductivity > 0.0)) throw std::invalid_argument("dipole_lead_columns: conductivity must be positive");
  Matrix block(static_cast<Index>(electrodes.size()), 3);
  const double scale = 1.0 / (4.0 * std::numbers::pi * conductivity);
  for (std::size_t e = 0; e < electrodes.size(); ++e) {
    const Vec3 d = electrodes[e] - r0;
    const double dist = d.norm();
    if (dist < 1e-9) throw SingularityError("dipole_lead_columns: dipole at electrode " + std::to_string(e));
    block.row(static_cast<Index>(e)) = (scale / (dist * dist * dist)) * d.transpose();
  }
  return block;
}

Matrix dipole_lead_columns(std::span<const Vec3> electrodes, const Vec3& r0, double conductivity) {
  Matrix block = dipole_lead_columns_unreferenced(electrodes, r0, conductivity);
  if (block.rows() > 0) block.rowwise() -= block.colwise().mean();
  return block;
}

LeadField build_lead_field(const HeadGeometry& geometry) {
  const auto m = static_cast<Index>(geometry.electrodes.size());
  const auto p = static_cast<Index>(geometry.sources.size());
  LeadField lf;
  lf.entries.resize(m, 3 * p);
  for (Index j = 0; j < p; ++j) {
    lf.entries.middleCols(3 * j, 3) =
        dipole_lead_columns(geometry.electrodes, geometry.sources[static_cast<std::size_t>(j)], geometry.conductivity);
  }
  return lf;
}

MeasurementSet simulate_measurement(const LeadField& lead_field, std::span<const DipoleSource> sources,
                                    double noise_level, std::uint64_t seed) {
  if (sources.empty()) throw std::invalid_argument("simulate_measurement: no sources");
  if (noise_level < 0.0) throw std::invalid_argument("simulate_measurement: negative noise level");
  if (lead_field.layout != ColumnLayout::kComponentMajor) {
    throw std::invalid_argument("simulate_measurement: lead field must be component-major");
  }
  MeasurementSet out;
  out.noise_level = noise_level;
  out.noise_seed = seed;
  out.clean = Vector::Zero(lead_field.rows());
  for (const auto& s : sources) {
    const Index col = 3 * s.group_id();
    if (col + 3 > lead_field.cols()) throw std::invalid_argument("simulate_measurement: source group out of range");
    out.clean += lead_field.entries.middleCols(col, 3) * s.moment();
  }
  out.noisy = out.clean;
  if (noise_level > 0.0) {
    const double sd = noise_level * out.clean.norm() / std::sqrt(static_cast<double>(out.clean.size()));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sd);
    for (Index i = 0; i < out.noisy.size(); ++i) out.noisy[i] += normal(rng);
  }
  return out;
}

double min_cross_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : a) {
    for (const auto& q : b) best = std::min(best, (p - q).norm());
  }
  return best;
}

}  // namespace wgl
