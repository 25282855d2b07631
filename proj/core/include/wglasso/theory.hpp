#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wglasso/core_model.hpp"
#include "wglasso/solver.hpp"

namespace wgl {

enum class Verdict { kPass, kFail, kNotApplicable };
std::string to_string(Verdict verdict);

struct AssumptionCheck {
  std::string name;
  bool passed = false;
  double margin = 0.0;
};

struct InstanceSummary {
  Index rows = 0;
  Index cols = 0;
  Index num_groups = 0;
  std::vector<Index> planted_groups;
  std::uint64_t seed = 0;
};

struct TheoremReport {
  std::string theorem_id;
  InstanceSummary instance;
  std::vector<AssumptionCheck> assumptions_checked;
  Verdict verdict = Verdict::kFail;
  std::map<std::string, double> error_metrics;
  std::vector<std::string> notes;

  bool assumptions_hold() const;
};

inline constexpr double kIndependenceTolerance = 1e-10;
inline constexpr double kImageTolerance = 1e-10;
inline constexpr double kRecoveryTolerance = 1e-5;
inline constexpr double kGammaTolerance = 1e-6;
inline constexpr double kPursuitEpsilon = 1e-9;

struct IndependenceCheck {
  bool independent = false;
  /// smallest / largest singular value of [C_g1, C_g2]
  double margin = 0.0;
};

IndependenceCheck check_pairwise_independence(const Matrix& C, const GroupStructure& groups, Index g1, Index g2,
                                              double tol = kIndependenceTolerance);

struct GroupImage {
  std::set<Index> groups;
  /// C^T C_g vanished identically.
  bool degenerate = false;
};

/// Generic group image: groups touched by the column support of C^T C_g.
GroupImage group_image(const Matrix& C, const GroupStructure& groups, Index g, double tol = kImageTolerance);

struct DisjointnessWitness {
  Index first = -1;
  Index second = -1;
  Index shared = -1;
};

struct DisjointnessCheck {
  bool disjoint = false;
  std::optional<DisjointnessWitness> witness;
  /// Pairwise disjointness of supp(C^T C_g x_g) over random draws.
  bool supports_disjoint = true;
};

DisjointnessCheck check_disjoint_images(const Matrix& C, const GroupStructure& groups, const std::vector<Index>& J,
                                        double tol = kImageTolerance, std::uint64_t seed = 0x5eed);

TheoremReport verify_single_group_pursuit(const Matrix& C, const GroupStructure& groups, Index g_star,
                                          const Vector& x_star_g, double epsilon = kPursuitEpsilon,
                                          const SolverConfig& config = {});

TheoremReport verify_disjoint_recovery(const Matrix& C, const GroupStructure& groups, const std::vector<Index>& J,
                                       const std::vector<Vector>& x_star, double epsilon = kPursuitEpsilon,
                                       const SolverConfig& config = {});

TheoremReport verify_gamma_scaling(const Matrix& C, const GroupStructure& groups, Index g_star, const Vector& x_star_g,
                                   const std::vector<double>& alpha_fractions, const SolverConfig& config = {});

/// Builds C = [Q_1 G_1, ..., Q_k G_k] with mutually orthogonal orthonormal
/// blocks Q_j (rows_per_group x group_size each) and Gaussian G_j, so that
/// every group image is the group itself.
Matrix make_orthogonal_block_operator(Index num_groups, Index group_size, Index rows_per_group, std::uint64_t seed);

/// i.i.d. standard normal entries.
Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed);

struct SingleGroupInstance {
  Matrix C;
  GroupStructure groups;
  Index g_star = 0;
  Vector x_star_g;
  std::uint64_t seed = 0;
};

/// Gaussian C (rows x num_groups*group_size), uniform g*, Gaussian x*_g.
SingleGroupInstance make_single_group_instance(Index rows, Index num_groups, Index group_size, std::uint64_t seed);

struct DisjointInstance {
  Matrix C;
  GroupStructure groups;
  std::vector<Index> planted;
  std::vector<Vector> x_star;
  std::uint64_t seed = 0;
};

/// Orthogonal-block operator with `planted` distinct groups drawn uniformly.
DisjointInstance make_disjoint_instance(Index num_groups, Index group_size, Index rows_per_group, Index planted,
                                        std::uint64_t seed);

struct TheoremSuiteOptions {
  int seeds = 20;
  std::uint64_t master_seed = 2024;
  std::vector<double> gamma_fractions{0.1, 0.5, 0.9};
  /// Add assumption-violating instances, reported but never counted.
  bool include_degenerate = true;
  SolverConfig solver;
};

struct SuiteCase {
  TheoremReport report;
  /// Excluded from the pass/fail outcome.
  bool informational = false;
};

struct TheoremSuiteResult {
  std::vector<SuiteCase> cases;
  int passed = 0;
  int failed = 0;
  int informational = 0;
  bool ok() const noexcept { return failed == 0; }
};

/// Per seed: single-group pursuit (12x30, 10 groups of 3), gamma scaling,
/// and disjoint recovery with 2 and 3 planted groups.
TheoremSuiteResult run_theorem_suite(const TheoremSuiteOptions& options);

}  // namespace wgl
