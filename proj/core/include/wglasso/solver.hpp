#pragma once

#include <string>
#include <vector>

#include "wglasso/core_model.hpp"

namespace wgl {

struct SolverConfig {
  /// Relative objective decrease per sweep below which the solve may stop.
  double tol_objective = 1e-10;
  /// Largest block change relative to max_g ||x_g|| below which the solve may stop.
  double tol_x = 1e-8;
  int max_sweeps = 10'000;
  /// A solve is only reported converged if kkt_residual <= kkt_tol.
  double kkt_tol = 1e-6;

  void validate() const;
};

/// 1/2 ||C x - rhs||^2 + alpha * sum_g ||C_g x_g||, evaluated densely.
double objective(const ProblemInstance& problem, double alpha, const Vector& x);

/// max_g ||P_g rhs||: the smallest alpha at which x = 0 is optimal.
double alpha_max(const ProblemInstance& problem);

/// Exact minimizer over x_g of 1/2 ||r - C_g x_g||^2 + alpha ||C_g x_g||
/// where r is the partial residual rhs - sum_{g' != g} C_g' x_g' (data space).
/// Returns the minimum-norm minimizer when C_g is rank deficient.
Vector group_update(const ProblemInstance& problem, Index g, const Vector& partial_residual, double alpha);

/// Cyclic block coordinate descent from the warm start x0 (entries outside
/// every group are forced to zero). Never throws on non-convergence; the
/// result carries converged = false instead.
SolveResult bcd_solve(const ProblemInstance& problem, double alpha, const Vector& x0,
                      const SolverConfig& config = {});

/// First-order optimality residual: scaled stationarity on active groups,
/// relative threshold violation (||P_g r|| - alpha) / alpha on inactive ones.
double kkt_residual(const ProblemInstance& problem, double alpha, const Vector& x);

struct MorozovOptions {
  double tau = 1.05;
  /// Lower end of the alpha search; 0 selects 1e-10 * alpha_max.
  double alpha_lo = 0.0;
  /// Upper end; 0 selects alpha_max. Must not be below alpha_max.
  double alpha_hi = 0.0;
  int max_bisections = 40;
  /// Geometric step used to bracket the target before bisecting.
  double descent_factor = 0.1;
};

struct MorozovResult {
  double alpha = 0.0;
  SolveResult result;
  bool in_bracket = false;
  /// "bracket", "boundary_high", "boundary_low" or "max_bisections".
  std::string flag;
  int solves = 0;
};

/// Picks alpha with delta <= ||A x_alpha - b|| <= tau * delta, where the
/// discrepancy is measured in the original measurement space.
MorozovResult morozov_select_alpha(const ProblemInstance& problem, const Matrix& A, const Vector& b, double delta,
                                   const MorozovOptions& options = {}, const SolverConfig& config = {});

/// Uses the original (A, b) attached to `problem`.
MorozovResult morozov_select_alpha(const ProblemInstance& problem, double delta, const MorozovOptions& options = {},
                                   const SolverConfig& config = {});

struct PursuitStage {
  double alpha = 0.0;
  std::vector<Index> support;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct PursuitResult {
  SolveResult result;
  /// "feasible" when ||C x - rhs|| <= epsilon ||rhs||, "alpha_underflow" otherwise.
  std::string stop;
  std::vector<PursuitStage> stages;
};

inline constexpr double kPursuitShrink = 0.5;
inline constexpr double kPursuitAlphaFloor = 1e-12;

/// Approximates min sum_g ||C_g x_g|| s.t. C x = rhs by halving alpha from
/// alpha_max with warm starts until the residual drops below epsilon ||rhs||.
PursuitResult pursuit_solve(const ProblemInstance& problem, double epsilon, const SolverConfig& config = {});

}  // namespace wgl
