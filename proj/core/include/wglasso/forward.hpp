#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wglasso/core_model.hpp"

namespace wgl {

inline constexpr double kDefaultScalpRadiusMm = 90.0;
inline constexpr double kDefaultSourceShellFraction = 0.85;
inline constexpr double kDefaultConductivity = 3.3e-4;  // S/mm
inline constexpr double kDefaultMinSeparationMm = 2.0;
inline constexpr double kDefaultMinElectrodeDistanceMm = 15.0;
inline constexpr std::size_t kDefaultMaxAttempts = 1'000'000;

/// Spherical head: electrodes on the scalp sphere and candidate source
/// positions inside the ball of radius source_shell_fraction * scalp_radius.
struct HeadGeometry {
  double scalp_radius = kDefaultScalpRadiusMm;
  double source_shell_fraction = kDefaultSourceShellFraction;
  double conductivity = kDefaultConductivity;
  std::vector<Vec3> electrodes;
  std::vector<Vec3> sources;

  double source_radius() const noexcept { return source_shell_fraction * scalp_radius; }

  /// Throws std::invalid_argument if an electrode is off the sphere, a
  /// source lies outside the scalp or two sources are closer than
  /// `min_separation`.
  void validate(double min_separation = 0.0) const;
};

struct MeasurementSet {
  Vector clean;
  Vector noisy;
  double noise_level = 0.0;
  std::uint64_t noise_seed = 0;

  Vector noise() const { return noisy - clean; }
};

/// Deterministic Fibonacci spiral lattice of `count` points on the sphere.
std::vector<Vec3> place_electrodes(int count, double radius);

struct GridConstraints {
  double ball_radius = kDefaultScalpRadiusMm * kDefaultSourceShellFraction;
  double min_separation = kDefaultMinSeparationMm;
  /// Clearance to every electrode (0 disables).
  double min_electrode_distance = 0.0;
  std::span<const Vec3> electrodes;
  /// Positions that sampled points must not coincide with.
  std::span<const Vec3> exclude;
  std::size_t max_attempts = kDefaultMaxAttempts;
};

/// Rejection-samples `count` uniform points in the ball. Throws CapacityError
/// naming the constraint that rejected the most candidates when
/// max_attempts is exhausted.
std::vector<Vec3> sample_source_grid(int count, const GridConstraints& constraints, std::uint64_t seed);

/// m x 3 block of potentials at the electrodes for unit moments along x, y, z
/// at r0, in an infinite homogeneous medium, average referenced.
Matrix dipole_lead_columns(std::span<const Vec3> electrodes, const Vec3& r0, double conductivity);

/// Same block before the average reference is applied.
Matrix dipole_lead_columns_unreferenced(std::span<const Vec3> electrodes, const Vec3& r0, double conductivity);

LeadField build_lead_field(const HeadGeometry& geometry);

MeasurementSet simulate_measurement(const LeadField& lead_field, std::span<const DipoleSource> sources,
                                    double noise_level, std::uint64_t seed);

/// Smallest distance between a point of `a` and a point of `b`.
double min_cross_distance(std::span<const Vec3> a, std::span<const Vec3> b);

}  // namespace wgl
