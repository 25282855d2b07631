#include "wglasso/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace wgl {

void SolverConfig::validate() const {
  if (!(tol_objective > 0.0) || !(tol_x > 0.0) || !(kkt_tol > 0.0)) {
    throw std::invalid_argument("SolverConfig: tolerances must be positive");
  }
  if (max_sweeps < 1) throw std::invalid_argument("SolverConfig: max_sweeps must be at least 1");
}

namespace {

double group_norm_of(const Matrix& C, std::span<const Index> group, const Vector& x) {
  Vector acc = Vector::Zero(C.rows());
  for (Index i : group) {
    if (x[i] != 0.0) acc += x[i] * C.col(i);
  }
  return acc.norm();
}

// Working state of one solve, kept in the problem's reduced coordinates.
class BlockState {
 public:
  BlockState(const ProblemInstance& problem, const Vector& x0) : problem_(problem), groups_(problem.groups()) {
    const Index n = problem.cols();
    if (x0.size() != n) throw std::invalid_argument("bcd_solve: warm start has wrong length");
    x_ = Vector::Zero(n);
    offsets_.reserve(static_cast<std::size_t>(groups_.size()) + 1);
    offsets_.push_back(0);
    Index max_size = 0;
    Index max_rank = 0;
    for (Index g = 0; g < groups_.size(); ++g) {
      for (Index i : groups_[g]) x_[i] = x0[i];
      offsets_.push_back(offsets_.back() + problem.factor(g).rank);
      max_size = std::max(max_size, groups_.group_size(g));
      max_rank = std::max(max_rank, problem.factor(g).rank);
    }
    coef_ = Vector::Zero(offsets_.back());
    xg_.resize(max_size);
    xnew_.resize(max_size);
    z_.resize(max_rank);
    cnew_.resize(max_rank);
    for (Index g = 0; g < groups_.size(); ++g) {
      const auto& f = problem.factor(g);
      gather(g, xg_);
      coef(g).noalias() = f.coefficients * xg_.head(groups_.group_size(g));
    }
    refresh_residual();
  }

  // r = reduced_rhs - reduced_C x, recomputed from scratch.
  void refresh_residual() {
    residual_ = problem_.reduced_rhs();
    for (Index g = 0; g < groups_.size(); ++g) {
      const auto& f = problem_.factor(g);
      if (f.rank > 0) residual_.noalias() -= f.basis * coef(g);
    }
  }

  // One cyclic pass over every group. Returns the largest block change.
  double sweep(double alpha) {
    double max_change = 0.0;
    for (Index g = 0; g < groups_.size(); ++g) max_change = std::max(max_change, update(g, alpha));
    return max_change;
  }

  // One cyclic pass over `order` only.
  double sweep(double alpha, std::span<const Index> order) {
    double max_change = 0.0;
    for (Index g : order) max_change = std::max(max_change, update(g, alpha));
    return max_change;
  }

  // Groups with a nonzero block, in index order.
  std::vector<Index> nonzero_groups() const {
    std::vector<Index> out;
    for (Index g = 0; g < groups_.size(); ++g) {
      for (Index i : groups_[g]) {
        if (x_[i] != 0.0) {
          out.push_back(g);
          break;
        }
      }
    }
    return out;
  }

  // Exact minimization over block g; returns ||x_g_new - x_g_old||.
  double update(Index g, double alpha) {
    {
      const auto& f = problem_.factor(g);
      const Index size = groups_.group_size(g);
      const Index rank = f.rank;
      auto c = coef(g);
      gather(g, xg_);
      auto x_old = xg_.head(size);
      auto z = z_.head(rank);
      z.noalias() = f.basis.transpose() * residual_;
      z += c;
      const double zn = z.norm();
      auto x_new = xnew_.head(size);
      auto c_new = cnew_.head(rank);
      if (zn <= alpha) {
        c_new.setZero();
        x_new.setZero();
      } else {
        c_new = (1.0 - alpha / zn) * z;
        x_new.noalias() = f.solve * c_new;
      }
      const double change = (x_new - x_old).norm();
      if (rank > 0) {
        z = c - c_new;
        residual_.noalias() += f.basis * z;
      }
      c = c_new;
      scatter_block(g, x_new);
      return change;
    }
  }

  double reduced_objective(double alpha) const {
    double penalty = 0.0;
    for (Index g = 0; g < groups_.size(); ++g) penalty += coef(g).norm();
    return 0.5 * (residual_.squaredNorm() + problem_.rhs_offset_squared()) + alpha * penalty;
  }

  double max_group_norm() const {
    double out = 0.0;
    for (Index g = 0; g < groups_.size(); ++g) {
      double s = 0.0;
      for (Index i : groups_[g]) s += x_[i] * x_[i];
      out = std::max(out, s);
    }
    return std::sqrt(out);
  }

  const Vector& x() const noexcept { return x_; }

 private:
  Eigen::VectorBlock<Vector> coef(Index g) { return coef_.segment(offsets_[g], offsets_[g + 1] - offsets_[g]); }
  Eigen::VectorBlock<const Vector> coef(Index g) const {
    return coef_.segment(offsets_[g], offsets_[g + 1] - offsets_[g]);
  }

  void gather(Index g, Vector& out) const {
    const auto idx = groups_[g];
    for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<Index>(k)] = x_[idx[k]];
  }

  template <class Block>
  void scatter_block(Index g, const Block& values) {
    const auto idx = groups_[g];
    for (std::size_t k = 0; k < idx.size(); ++k) x_[idx[k]] = values[static_cast<Index>(k)];
  }

  const ProblemInstance& problem_;
  const GroupStructure& groups_;
  std::vector<Index> offsets_;
  Vector x_;
  Vector coef_;
  Vector residual_;
  Vector xg_, xnew_, z_, cnew_;
};

constexpr int kResidualRefreshInterval = 64;
constexpr double kZeroNormGuard = 1e-14;

void finalize(const ProblemInstance& problem, SolveResult& result) {
  result.objective = objective(problem, result.alpha, result.x);
  result.discrepancy_transformed = (problem.C() * result.x - problem.rhs()).norm();
  result.discrepancy_original = problem.has_original()
                                    ? (problem.original_operator() * result.x - problem.original_data()).norm()
                                    : std::numeric_limits<double>::quiet_NaN();
  result.active_groups = active_groups(result.x, problem.groups());
  result.kkt_residual = kkt_residual(problem, result.alpha, result.x);
}

}  // namespace

double objective(const ProblemInstance& problem, double alpha, const Vector& x) {
  if (alpha < 0.0) throw std::invalid_argument("objective: alpha must be non-negative");
  if (x.size() != problem.cols()) throw std::invalid_argument("objective: x has wrong length");
  const double fit = 0.5 * (problem.C() * x - problem.rhs()).squaredNorm();
  double penalty = 0.0;
  const auto& groups = problem.groups();
  for (Index g = 0; g < groups.size(); ++g) penalty += group_norm_of(problem.C(), groups[g], x);
  return fit + alpha * penalty;
}

double alpha_max(const ProblemInstance& problem) {
  double best = 0.0;
  const Vector& r = problem.reduced_rhs();
  for (Index g = 0; g < problem.groups().size(); ++g) {
    const auto& f = problem.factor(g);
    if (f.rank > 0) best = std::max(best, (f.basis.transpose() * r).norm());
  }
  return best;
}

Vector group_update(const ProblemInstance& problem, Index g, const Vector& partial_residual, double alpha) {
  if (partial_residual.size() != problem.rows()) throw std::invalid_argument("group_update: residual length mismatch");
  if (g < 0 || g >= problem.groups().size()) throw std::invalid_argument("group_update: group out of range");
  const auto& f = problem.factor(g);
  const Vector z = f.basis.transpose() * problem.to_reduced(partial_residual);
  const double zn = z.norm();
  if (zn <= alpha) return Vector::Zero(problem.groups().group_size(g));
  return f.solve * ((1.0 - alpha / zn) * z);
}

double kkt_residual(const ProblemInstance& problem, double alpha, const Vector& x) {
  if (x.size() != problem.cols()) throw std::invalid_argument("kkt_residual: x has wrong length");
  const Matrix& C = problem.reduced_operator();
  const Vector r = C * x - problem.reduced_rhs();
  const auto& groups = problem.groups();
  double worst = 0.0;
  for (Index g = 0; g < groups.size(); ++g) {
    const auto& f = problem.factor(g);
    const Vector xg = subvector(x, groups[g]);
    const Vector cg = f.coefficients * xg;
    const double cn = cg.norm();
    const Vector pr = f.basis.transpose() * r;
    double value = 0.0;
    if (xg.norm() > 0.0 && cn >= kZeroNormGuard) {
      const Vector stationarity = f.coefficients.transpose() * (pr + alpha * cg / cn);
      const Vector data_corr = f.coefficients.transpose() * (f.basis.transpose() * problem.reduced_rhs());
      value = stationarity.norm() / (1.0 + data_corr.norm());
    } else if (alpha > 0.0) {
      value = std::max(0.0, pr.norm() - alpha) / alpha;
    } else {
      value = pr.norm();
    }
    worst = std::max(worst, value);
  }
  return worst;
}

SolveResult bcd_solve(const ProblemInstance& problem, double alpha, const Vector& x0, const SolverConfig& config) {
  config.validate();
  if (!(alpha > 0.0)) throw std::invalid_argument("bcd_solve: alpha must be positive");

  BlockState state(problem, x0);
  SolveResult result;
  result.alpha = alpha;
  result.termination = "max_sweeps";

  // Full cyclic sweeps alternate with cyclic sweeps restricted to the
  // nonzero groups; convergence is only declared after a full sweep.
  double previous = state.reduced_objective(alpha);
  int sweeps = 0;
  const auto step = [&](double change) {
    ++sweeps;
    if (sweeps % kResidualRefreshInterval == 0) state.refresh_residual();
    const double current = state.reduced_objective(alpha);
    const double scale = std::max(std::abs(previous), std::numeric_limits<double>::min());
    if (current > previous + 1e-12 * scale) result.monotone = false;
    const double decrease = (previous - current) / scale;
    previous = current;
    const double largest = state.max_group_norm();
    const double relative_change = largest > 0.0 ? change / largest : change;
    return decrease <= config.tol_objective && relative_change <= config.tol_x;
  };

  while (sweeps < config.max_sweeps) {
    if (step(state.sweep(alpha))) {
      state.refresh_residual();
      if (kkt_residual(problem, alpha, state.x()) <= config.kkt_tol) {
        result.converged = true;
        result.termination = "converged";
        break;
      }
    }
    const std::vector<Index> active = state.nonzero_groups();
    if (active.empty()) continue;
    while (sweeps < config.max_sweeps) {
      if (step(state.sweep(alpha, active))) break;
    }
  }
  result.iterations = sweeps;
  result.x = state.x();
  finalize(problem, result);
  return result;
}

MorozovResult morozov_select_alpha(const ProblemInstance& problem, const Matrix& A, const Vector& b, double delta,
                                   const MorozovOptions& options, const SolverConfig& config) {
  if (!(delta > 0.0)) throw std::invalid_argument("morozov_select_alpha: delta must be positive");
  if (!(options.tau >= 1.0)) throw std::invalid_argument("morozov_select_alpha: tau must be >= 1");
  if (options.max_bisections < 0) throw std::invalid_argument("morozov_select_alpha: negative bisection budget");
  if (!(options.descent_factor > 0.0 && options.descent_factor < 1.0)) {
    throw std::invalid_argument("morozov_select_alpha: descent factor must lie in (0, 1)");
  }
  if (A.cols() != problem.cols() || A.rows() != b.size()) {
    throw std::invalid_argument("morozov_select_alpha: dimension mismatch");
  }

  const double top = alpha_max(problem);
  const double hi_bound = options.alpha_hi > 0.0 ? options.alpha_hi : top;
  if (hi_bound < top) throw std::invalid_argument("morozov_select_alpha: alpha_hi below alpha_max");
  const double lo_bound = options.alpha_lo > 0.0 ? options.alpha_lo : 1e-10 * top;

  MorozovResult out;
  const double upper = options.tau * delta;
  const auto discrepancy = [&](const Vector& x) { return (A * x - b).norm(); };
  const auto solve = [&](double alpha, const Vector& warm) {
    ++out.solves;
    SolveResult r = bcd_solve(problem, alpha, warm, config);
    r.discrepancy_original = discrepancy(r.x);
    return r;
  };
  const auto finish = [&](SolveResult r, const std::string& flag) {
    out.alpha = r.alpha;
    out.flag = flag;
    out.in_bracket = flag == "bracket";
    out.result = std::move(r);
    return out;
  };

  const Vector zero = Vector::Zero(problem.cols());
  if (!(top > 0.0) || hi_bound <= lo_bound) {
    SolveResult r;
    r.alpha = hi_bound > 0.0 ? hi_bound : 1.0;
    r.x = zero;
    r.converged = true;
    r.termination = "converged";
    finalize(problem, r);
    r.discrepancy_original = discrepancy(zero);
    const bool inside = r.discrepancy_original >= delta && r.discrepancy_original <= upper;
    return finish(std::move(r), inside ? "bracket" : "boundary_high");
  }

  // x = 0 is optimal for every alpha >= alpha_max.
  SolveResult high = solve(hi_bound, zero);
  if (high.discrepancy_original >= delta && high.discrepancy_original <= upper) return finish(std::move(high), "bracket");
  if (high.discrepancy_original < delta) return finish(std::move(high), "boundary_high");

  // Walk down geometrically until the discrepancy falls below tau * delta.
  SolveResult low;
  bool bracketed = false;
  double alpha = hi_bound;
  while (true) {
    const double next = std::max(alpha * options.descent_factor, lo_bound);
    SolveResult r = solve(next, high.x);
    if (r.discrepancy_original >= delta && r.discrepancy_original <= upper) return finish(std::move(r), "bracket");
    if (r.discrepancy_original < delta) {
      low = std::move(r);
      bracketed = true;
      break;
    }
    high = std::move(r);
    alpha = next;
    if (next <= lo_bound) break;
  }
  if (!bracketed) return finish(std::move(high), "boundary_low");

  // Bisection on log alpha between low (too small a misfit) and high (too large).
  for (int it = 0; it < options.max_bisections; ++it) {
    const double mid = std::sqrt(low.alpha * high.alpha);
    SolveResult r = solve(mid, low.x);
    if (r.discrepancy_original >= delta && r.discrepancy_original <= upper) return finish(std::move(r), "bracket");
    if (r.discrepancy_original < delta) {
      low = std::move(r);
    } else {
      high = std::move(r);
    }
  }
  const double miss_low = std::log(delta / low.discrepancy_original);
  const double miss_high = std::log(high.discrepancy_original / upper);
  return finish(miss_low <= miss_high ? std::move(low) : std::move(high), "max_bisections");
}

MorozovResult morozov_select_alpha(const ProblemInstance& problem, double delta, const MorozovOptions& options,
                                   const SolverConfig& config) {
  if (!problem.has_original()) throw std::invalid_argument("morozov_select_alpha: problem has no original data");
  return morozov_select_alpha(problem, problem.original_operator(), problem.original_data(), delta, options, config);
}

PursuitResult pursuit_solve(const ProblemInstance& problem, double epsilon, const SolverConfig& config) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("pursuit_solve: epsilon must be positive");
  config.validate();

  PursuitResult out;
  const double target = epsilon * problem.rhs().norm();
  const double top = alpha_max(problem);
  const auto record = [&](const SolveResult& r) {
    out.stages.push_back({r.alpha, r.active_groups, r.discrepancy_transformed, r.iterations, r.converged});
  };

  if (!(top > 0.0)) {
    SolveResult r;
    r.alpha = 0.0;
    r.x = Vector::Zero(problem.cols());
    r.converged = true;
    r.termination = "converged";
    finalize(problem, r);
    record(r);
    out.result = std::move(r);
    out.stop = "feasible";
    return out;
  }

  SolveResult current = bcd_solve(problem, top, Vector::Zero(problem.cols()), config);
  record(current);
  double alpha = top;
  while (current.discrepancy_transformed > target) {
    alpha *= kPursuitShrink;
    if (alpha < kPursuitAlphaFloor * top) {
      out.stop = "alpha_underflow";
      out.result = std::move(current);
      return out;
    }
    current = bcd_solve(problem, alpha, current.x, config);
    record(current);
  }
  out.stop = "feasible";
  out.result = std::move(current);
  return out;
}

}  // namespace wgl
