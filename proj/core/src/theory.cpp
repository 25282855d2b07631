#include "wglasso/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "wglasso/weighting.hpp"

namespace wgl {

std::string to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kPass:
      return "pass";
    case Verdict::kFail:
      return "fail";
    case Verdict::kNotApplicable:
      return "not_applicable";
  }
  return "unknown";
}

bool TheoremReport::assumptions_hold() const {
  return std::all_of(assumptions_checked.begin(), assumptions_checked.end(),
                     [](const AssumptionCheck& a) { return a.passed; });
}

namespace {

Matrix gather_columns(const Matrix& C, std::span<const Index> idx) {
  Matrix out(C.rows(), static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Index>(k)) = C.col(idx[k]);
  return out;
}

void check_group(const GroupStructure& groups, Index g, const char* where) {
  if (g < 0 || g >= groups.size()) throw std::invalid_argument(std::string(where) + ": group out of range");
}

ProblemInstance exact_data_problem(const Matrix& C, const GroupStructure& groups, const Vector& x_star) {
  const Vector rhs = C * x_star;
  return compose_problem(C, identity_weighting(C.rows()), rhs, groups);
}

InstanceSummary summarize(const Matrix& C, const GroupStructure& groups, std::vector<Index> planted) {
  InstanceSummary s;
  s.rows = C.rows();
  s.cols = C.cols();
  s.num_groups = groups.size();
  s.planted_groups = std::move(planted);
  return s;
}

std::size_t support_mismatch(const std::vector<Index>& found, std::vector<Index> expected) {
  std::sort(expected.begin(), expected.end());
  std::vector<Index> diff;
  std::set_symmetric_difference(found.begin(), found.end(), expected.begin(), expected.end(),
                                std::back_inserter(diff));
  return diff.size();
}

}  // namespace

IndependenceCheck check_pairwise_independence(const Matrix& C, const GroupStructure& groups, Index g1, Index g2,
                                              double tol) {
  check_group(groups, g1, "check_pairwise_independence");
  check_group(groups, g2, "check_pairwise_independence");
  if (g1 == g2) throw std::invalid_argument("check_pairwise_independence: groups must differ");
  const Index cols = groups.group_size(g1) + groups.group_size(g2);
  Matrix M(C.rows(), cols);
  M << gather_columns(C, groups[g1]), gather_columns(C, groups[g2]);
  IndependenceCheck out;
  Eigen::JacobiSVD<Matrix> svd(M);
  const Vector& s = svd.singularValues();
  if (cols > C.rows() || s.size() == 0 || !(s[0] > 0.0)) return out;
  out.margin = s[s.size() - 1] / s[0];
  out.independent = out.margin > tol;
  return out;
}

GroupImage group_image(const Matrix& C, const GroupStructure& groups, Index g, double tol) {
  check_group(groups, g, "group_image");
  const Matrix M = C.transpose() * gather_columns(C, groups[g]);
  GroupImage out;
  const double largest = M.cwiseAbs().maxCoeff();
  if (!(largest > 0.0)) {
    out.degenerate = true;
    return out;
  }
  for (Index h = 0; h < groups.size(); ++h) {
    double row_max = 0.0;
    for (Index i : groups[h]) row_max = std::max(row_max, M.row(i).cwiseAbs().maxCoeff());
    if (row_max > tol * largest) out.groups.insert(h);
  }
  return out;
}

DisjointnessCheck check_disjoint_images(const Matrix& C, const GroupStructure& groups, const std::vector<Index>& J,
                                        double tol, std::uint64_t seed) {
  DisjointnessCheck out;
  out.disjoint = true;
  if (J.size() < 2) return out;

  std::vector<GroupImage> images;
  images.reserve(J.size());
  for (Index g : J) images.push_back(group_image(C, groups, g, tol));
  for (std::size_t a = 0; a < J.size() && out.disjoint; ++a) {
    for (std::size_t b = a + 1; b < J.size() && out.disjoint; ++b) {
      for (Index h : images[a].groups) {
        if (images[b].groups.count(h) != 0) {
          out.disjoint = false;
          out.witness = DisjointnessWitness{J[a], J[b], h};
          break;
        }
      }
    }
  }

  // supp(C^T C_g x_g) for random x_g, unioned over draws.
  constexpr int kDraws = 10;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<std::vector<bool>> support(J.size(), std::vector<bool>(static_cast<std::size_t>(C.cols()), false));
  for (std::size_t a = 0; a < J.size(); ++a) {
    const Matrix Cg = gather_columns(C, groups[J[a]]);
    for (int d = 0; d < kDraws; ++d) {
      Vector xg(Cg.cols());
      for (Index i = 0; i < xg.size(); ++i) xg[i] = normal(rng);
      const Vector v = C.transpose() * (Cg * xg);
      const double largest = v.cwiseAbs().maxCoeff();
      for (Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > tol * largest) support[a][static_cast<std::size_t>(i)] = true;
      }
    }
  }
  for (std::size_t a = 0; a < J.size(); ++a) {
    for (std::size_t b = a + 1; b < J.size(); ++b) {
      for (std::size_t i = 0; i < support[a].size(); ++i) {
        if (support[a][i] && support[b][i]) out.supports_disjoint = false;
      }
    }
  }
  return out;
}

TheoremReport verify_single_group_pursuit(const Matrix& C, const GroupStructure& groups, Index g_star,
                                          const Vector& x_star_g, double epsilon, const SolverConfig& config) {
  check_group(groups, g_star, "verify_single_group_pursuit");
  if (x_star_g.size() != groups.group_size(g_star) || x_star_g.isZero(0.0)) {
    throw std::invalid_argument("verify_single_group_pursuit: planted block must be nonzero and match the group");
  }
  TheoremReport report;
  report.theorem_id = "single_group_pursuit";
  report.instance = summarize(C, groups, {g_star});

  double min_margin = 1.0;
  bool independent = true;
  for (Index g = 0; g < groups.size(); ++g) {
    if (g == g_star) continue;
    const auto check = check_pairwise_independence(C, groups, g_star, g);
    min_margin = std::min(min_margin, check.margin);
    independent = independent && check.independent;
  }
  report.assumptions_checked.push_back({"pairwise_independence", independent, min_margin});

  Vector x_star = Vector::Zero(C.cols());
  scatter(x_star, groups[g_star], x_star_g);
  const ProblemInstance problem = exact_data_problem(C, groups, x_star);
  const PursuitResult pursuit = pursuit_solve(problem, epsilon, config);
  const SolveResult& result = pursuit.result;

  const double planted_norm = (C * x_star).norm();
  const double gamma = 1.0 - result.alpha / planted_norm;
  const double rel_error = (result.x / gamma - x_star).norm() / x_star.norm();
  std::size_t wrong_stages = 0;
  for (const auto& stage : pursuit.stages) {
    if (stage.alpha < pursuit.stages.front().alpha && stage.support != std::vector<Index>{g_star}) ++wrong_stages;
  }
  const auto mismatch = support_mismatch(result.active_groups, {g_star});

  report.error_metrics["support_mismatch"] = static_cast<double>(mismatch);
  report.error_metrics["relative_error"] = rel_error;
  report.error_metrics["final_alpha"] = result.alpha;
  report.error_metrics["gamma"] = gamma;
  report.error_metrics["continuation_stages"] = static_cast<double>(pursuit.stages.size());
  report.error_metrics["stages_with_other_support"] = static_cast<double>(wrong_stages);
  if (pursuit.stop != "feasible") report.notes.push_back("continuation stopped by alpha underflow");

  const bool recovered = mismatch == 0 && rel_error <= kRecoveryTolerance && pursuit.stop == "feasible";
  if (!report.assumptions_hold()) {
    report.verdict = Verdict::kNotApplicable;
    report.notes.push_back(std::string("assumption failed; recovery ") + (recovered ? "held" : "did not hold"));
  } else {
    report.verdict = recovered ? Verdict::kPass : Verdict::kFail;
  }
  return report;
}

TheoremReport verify_disjoint_recovery(const Matrix& C, const GroupStructure& groups, const std::vector<Index>& J,
                                       const std::vector<Vector>& x_star, double epsilon, const SolverConfig& config) {
  if (J.size() < 2 || J.size() != x_star.size()) {
    throw std::invalid_argument("verify_disjoint_recovery: need at least two groups with one block each");
  }
  TheoremReport report;
  report.theorem_id = "disjoint_group_recovery";
  report.instance = summarize(C, groups, J);

  Vector planted = Vector::Zero(C.cols());
  for (std::size_t a = 0; a < J.size(); ++a) {
    check_group(groups, J[a], "verify_disjoint_recovery");
    if (x_star[a].size() != groups.group_size(J[a]) || x_star[a].isZero(0.0)) {
      throw std::invalid_argument("verify_disjoint_recovery: planted blocks must be nonzero and match their groups");
    }
    scatter(planted, groups[J[a]], x_star[a]);
  }

  const auto disjoint = check_disjoint_images(C, groups, J);
  report.assumptions_checked.push_back({"disjoint_group_images", disjoint.disjoint, disjoint.disjoint ? 1.0 : 0.0});
  report.assumptions_checked.push_back(
      {"disjoint_gram_supports", disjoint.supports_disjoint, disjoint.supports_disjoint ? 1.0 : 0.0});
  if (disjoint.witness) {
    report.notes.push_back("groups " + std::to_string(disjoint.witness->first) + " and " +
                           std::to_string(disjoint.witness->second) + " share image group " +
                           std::to_string(disjoint.witness->shared));
  }

  const ProblemInstance problem = exact_data_problem(C, groups, planted);
  const PursuitResult pursuit = pursuit_solve(problem, epsilon, config);
  const SolveResult& result = pursuit.result;

  // Under disjoint images the regularized problem splits per group, each
  // block shrinking by its own factor 1 - alpha / ||C_g x*_g||.
  double worst = 0.0;
  double worst_raw = 0.0;
  for (std::size_t a = 0; a < J.size(); ++a) {
    const Vector xg = subvector(result.x, groups[J[a]]);
    const double norm = (gather_columns(C, groups[J[a]]) * x_star[a]).norm();
    const double gamma = 1.0 - result.alpha / norm;
    worst = std::max(worst, (xg / gamma - x_star[a]).norm() / x_star[a].norm());
    worst_raw = std::max(worst_raw, (xg - x_star[a]).norm() / x_star[a].norm());
  }
  const auto mismatch = support_mismatch(result.active_groups, J);
  report.error_metrics["support_mismatch"] = static_cast<double>(mismatch);
  report.error_metrics["max_group_relative_error"] = worst;
  report.error_metrics["max_group_relative_error_unscaled"] = worst_raw;
  report.error_metrics["final_alpha"] = result.alpha;
  report.error_metrics["continuation_stages"] = static_cast<double>(pursuit.stages.size());

  const bool recovered = mismatch == 0 && worst <= kRecoveryTolerance && pursuit.stop == "feasible";
  if (!report.assumptions_hold()) {
    report.verdict = Verdict::kNotApplicable;
    report.notes.push_back(std::string("assumption failed; recovery ") + (recovered ? "held" : "did not hold"));
  } else {
    report.verdict = recovered ? Verdict::kPass : Verdict::kFail;
  }
  return report;
}

TheoremReport verify_gamma_scaling(const Matrix& C, const GroupStructure& groups, Index g_star, const Vector& x_star_g,
                                   const std::vector<double>& alpha_fractions, const SolverConfig& config) {
  check_group(groups, g_star, "verify_gamma_scaling");
  if (x_star_g.size() != groups.group_size(g_star) || x_star_g.isZero(0.0)) {
    throw std::invalid_argument("verify_gamma_scaling: planted block must be nonzero and match the group");
  }
  if (alpha_fractions.empty()) throw std::invalid_argument("verify_gamma_scaling: no alpha fractions");
  TheoremReport report;
  report.theorem_id = "gamma_scaling";
  report.instance = summarize(C, groups, {g_star});

  Vector x_star = Vector::Zero(C.cols());
  scatter(x_star, groups[g_star], x_star_g);
  const ProblemInstance problem = exact_data_problem(C, groups, x_star);
  const double planted_norm = (C * x_star).norm();

  double worst = 0.0;
  bool all_converged = true;
  for (double f : alpha_fractions) {
    if (!(f > 0.0)) throw std::invalid_argument("verify_gamma_scaling: fractions must be positive");
    const SolveResult r = bcd_solve(problem, f * planted_norm, Vector::Zero(C.cols()), config);
    const double gamma = std::max(0.0, 1.0 - f);
    const double deviation = (r.x - gamma * x_star).norm() / x_star.norm();
    worst = std::max(worst, deviation);
    all_converged = all_converged && r.converged;
  }
  report.error_metrics["max_gamma_deviation"] = worst;
  report.error_metrics["fractions"] = static_cast<double>(alpha_fractions.size());
  if (!all_converged) report.notes.push_back("a regularized solve hit the sweep limit");
  report.verdict = worst <= kGammaTolerance ? Verdict::kPass : Verdict::kFail;
  return report;
}

Matrix make_orthogonal_block_operator(Index num_groups, Index group_size, Index rows_per_group, std::uint64_t seed) {
  if (num_groups < 1 || group_size < 1 || rows_per_group < 1) {
    throw std::invalid_argument("make_orthogonal_block_operator: sizes must be positive");
  }
  const Index rows = num_groups * rows_per_group;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix gaussian(rows, rows);
  for (Index j = 0; j < rows; ++j) {
    for (Index i = 0; i < rows; ++i) gaussian(i, j) = normal(rng);
  }
  const Matrix Q = Eigen::HouseholderQR<Matrix>(gaussian).householderQ();
  Matrix C(rows, num_groups * group_size);
  for (Index g = 0; g < num_groups; ++g) {
    Matrix G(rows_per_group, group_size);
    for (Index j = 0; j < group_size; ++j) {
      for (Index i = 0; i < rows_per_group; ++i) G(i, j) = normal(rng);
    }
    C.middleCols(g * group_size, group_size) = Q.middleCols(g * rows_per_group, rows_per_group) * G;
  }
  return C;
}

Matrix gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  }
  return out;
}

namespace {

Vector gaussian_block(Index size, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector v(size);
  do {
    for (Index i = 0; i < size; ++i) v[i] = normal(rng);
  } while (v.norm() == 0.0);
  return v;
}

GroupStructure uniform_groups(Index num_groups, Index group_size) {
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(num_groups));
  for (Index g = 0; g < num_groups; ++g) {
    for (Index j = 0; j < group_size; ++j) members[static_cast<std::size_t>(g)].push_back(g * group_size + j);
  }
  return GroupStructure(std::move(members), num_groups * group_size);
}

}  // namespace

SingleGroupInstance make_single_group_instance(Index rows, Index num_groups, Index group_size, std::uint64_t seed) {
  if (rows < 1 || num_groups < 1 || group_size < 1) {
    throw std::invalid_argument("make_single_group_instance: sizes must be positive");
  }
  SingleGroupInstance out{gaussian_matrix(rows, num_groups * group_size, seed), uniform_groups(num_groups, group_size),
                          0, Vector(), seed};
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  out.g_star = static_cast<Index>(std::uniform_int_distribution<Index>(0, num_groups - 1)(rng));
  out.x_star_g = gaussian_block(group_size, rng);
  return out;
}

DisjointInstance make_disjoint_instance(Index num_groups, Index group_size, Index rows_per_group, Index planted,
                                        std::uint64_t seed) {
  if (planted < 1 || planted > num_groups) throw std::invalid_argument("make_disjoint_instance: bad planted count");
  DisjointInstance out{make_orthogonal_block_operator(num_groups, group_size, rows_per_group, seed),
                       uniform_groups(num_groups, group_size), {}, {}, seed};
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Index> ids(static_cast<std::size_t>(num_groups));
  std::iota(ids.begin(), ids.end(), Index{0});
  std::shuffle(ids.begin(), ids.end(), rng);
  out.planted.assign(ids.begin(), ids.begin() + planted);
  std::sort(out.planted.begin(), out.planted.end());
  for (Index i = 0; i < planted; ++i) out.x_star.push_back(gaussian_block(group_size, rng));
  return out;
}

TheoremSuiteResult run_theorem_suite(const TheoremSuiteOptions& options) {
  if (options.seeds < 1) throw std::invalid_argument("run_theorem_suite: seeds must be at least 1");
  TheoremSuiteResult out;
  const auto add = [&](TheoremReport report, std::uint64_t seed, bool informational) {
    report.instance.seed = seed;
    if (informational) {
      ++out.informational;
    } else if (report.verdict == Verdict::kPass) {
      ++out.passed;
    } else {
      ++out.failed;
    }
    out.cases.push_back({std::move(report), informational});
  };

  for (int s = 0; s < options.seeds; ++s) {
    const std::uint64_t seed = options.master_seed + static_cast<std::uint64_t>(s);
    const auto single = make_single_group_instance(12, 10, 3, seed);
    add(verify_single_group_pursuit(single.C, single.groups, single.g_star, single.x_star_g, kPursuitEpsilon,
                                    options.solver),
        seed, false);
    add(verify_gamma_scaling(single.C, single.groups, single.g_star, single.x_star_g, options.gamma_fractions,
                             options.solver),
        seed, false);
    for (Index planted : {Index{2}, Index{3}}) {
      const auto disjoint = make_disjoint_instance(6, 3, 4, planted, seed);
      add(verify_disjoint_recovery(disjoint.C, disjoint.groups, disjoint.planted, disjoint.x_star, kPursuitEpsilon,
                                   options.solver),
          seed, false);
    }
  }

  if (options.include_degenerate) {
    const std::uint64_t seed = options.master_seed;
    auto dup = make_single_group_instance(12, 10, 3, seed);
    const Index other = (dup.g_star + 1) % dup.groups.size();
    dup.C.middleCols(other * 3, 3) = dup.C.middleCols(dup.g_star * 3, 3);
    add(verify_single_group_pursuit(dup.C, dup.groups, dup.g_star, dup.x_star_g, kPursuitEpsilon, options.solver),
        seed, true);
    const auto dense = make_single_group_instance(12, 10, 3, seed);
    std::mt19937_64 rng(seed);
    add(verify_disjoint_recovery(dense.C, dense.groups, {0, 1}, {gaussian_block(3, rng), gaussian_block(3, rng)},
                                 kPursuitEpsilon, options.solver),
        seed, true);
  }
  return out;
}

}  // namespace wgl
