#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wglasso/solver.hpp"
#include "wglasso/theory.hpp"
#include "wglasso/weighting.hpp"

namespace wgl {
namespace {

double oracle_margin(const Matrix& C, Index g1, Index g2) {
  Matrix M(C.rows(), 6);
  M << C.middleCols(3 * g1, 3), C.middleCols(3 * g2, 3);
  const Eigen::BDCSVD<Matrix> svd(M);
  const Vector s = svd.singularValues();
  return s[s.size() - 1] / s[0];
}

TEST(IndependenceTest, Examples) {
  const Matrix I = Matrix::Identity(6, 6);
  const auto groups = make_dipole_groups(2);
  const auto orthogonal = check_pairwise_independence(I, groups, 0, 1);
  EXPECT_TRUE(orthogonal.independent);
  EXPECT_NEAR(orthogonal.margin, 1.0, 1e-14);

  Matrix dup = oracle::gaussian(6, 6, 1);
  dup.rightCols(3) = dup.leftCols(3);
  EXPECT_FALSE(check_pairwise_independence(dup, groups, 0, 1).independent);

  EXPECT_FALSE(check_pairwise_independence(oracle::gaussian(5, 6, 2), groups, 0, 1).independent);
  EXPECT_THROW(check_pairwise_independence(I, groups, 0, 0), std::invalid_argument);
  EXPECT_THROW(check_pairwise_independence(I, groups, 0, 2), std::invalid_argument);
}

TEST(IndependenceTest, MarginMatchesSvdOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix C = oracle::gaussian(9, 12, seed);
    const auto check = check_pairwise_independence(C, make_dipole_groups(4), 1, 3);
    EXPECT_NEAR(check.margin, oracle_margin(C, 1, 3), 1e-12);
    EXPECT_TRUE(check.independent);
  }
}

TEST(GroupImageTest, Examples) {
  const auto groups = make_dipole_groups(3);
  const auto identity = group_image(Matrix::Identity(9, 9), groups, 1);
  EXPECT_EQ(identity.groups, (std::set<Index>{1}));
  EXPECT_FALSE(identity.degenerate);

  const auto dense = group_image(oracle::gaussian(9, 9, 3), groups, 0);
  EXPECT_EQ(dense.groups, (std::set<Index>{0, 1, 2}));

  Matrix zero_block = oracle::gaussian(9, 9, 4);
  zero_block.middleCols(3, 3).setZero();
  EXPECT_TRUE(group_image(zero_block, groups, 1).degenerate);
  EXPECT_THROW(group_image(zero_block, groups, 3), std::invalid_argument);
}

TEST(GroupImageTest, OrthogonalBlocksMapToThemselves) {
  const Matrix C = make_orthogonal_block_operator(5, 3, 4, 5);
  const auto groups = make_dipole_groups(5);
  for (Index g = 0; g < 5; ++g) EXPECT_EQ(group_image(C, groups, g).groups, (std::set<Index>{g}));
}

TEST(GroupImageTest, ShrinksAsToleranceGrows) {
  Matrix C = make_orthogonal_block_operator(4, 3, 4, 6);
  C += 1e-4 * oracle::gaussian(16, 12, 7);
  const auto groups = make_dipole_groups(4);
  for (Index g = 0; g < 4; ++g) {
    std::set<Index> previous = group_image(C, groups, g, 1e-12).groups;
    for (double tol : {1e-8, 1e-5, 1e-2, 0.5}) {
      const auto current = group_image(C, groups, g, tol).groups;
      EXPECT_TRUE(std::includes(previous.begin(), previous.end(), current.begin(), current.end()));
      previous = current;
    }
  }
}

TEST(DisjointImagesTest, Examples) {
  const auto groups = make_dipole_groups(4);
  const auto orth = check_disjoint_images(make_orthogonal_block_operator(4, 3, 4, 8), groups, {0, 2, 3});
  EXPECT_TRUE(orth.disjoint);
  EXPECT_TRUE(orth.supports_disjoint);
  EXPECT_FALSE(orth.witness.has_value());

  const auto dense = check_disjoint_images(oracle::gaussian(12, 12, 9), groups, {0, 1});
  EXPECT_FALSE(dense.disjoint);
  ASSERT_TRUE(dense.witness.has_value());
  EXPECT_EQ(dense.witness->first, 0);
  EXPECT_EQ(dense.witness->second, 1);
  EXPECT_FALSE(dense.supports_disjoint);

  EXPECT_TRUE(check_disjoint_images(oracle::gaussian(12, 12, 9), groups, {2}).disjoint);
}

TEST(SingleGroupPursuitTest, IdentityOperator) {
  const Vector x = (Vector(3) << 1.0, -2.0, 0.5).finished();
  const auto report = verify_single_group_pursuit(Matrix::Identity(6, 6), make_dipole_groups(2), 1, x);
  EXPECT_EQ(report.verdict, Verdict::kPass);
  EXPECT_EQ(report.theorem_id, "single_group_pursuit");
  EXPECT_LE(report.error_metrics.at("relative_error"), kRecoveryTolerance);
}

TEST(SingleGroupPursuitTest, RandomInstancesPass) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto inst = make_single_group_instance(12, 10, 3, 500 + seed);
    const auto report = verify_single_group_pursuit(inst.C, inst.groups, inst.g_star, inst.x_star_g);
    EXPECT_EQ(report.verdict, Verdict::kPass) << "seed " << seed;
    EXPECT_EQ(report.error_metrics.at("support_mismatch"), 0.0);
    EXPECT_EQ(report.error_metrics.at("stages_with_other_support"), 0.0);
  }
}

TEST(SingleGroupPursuitTest, DuplicatedColumnsAreNotApplicable) {
  auto inst = make_single_group_instance(12, 10, 3, 77);
  const Index other = (inst.g_star + 1) % 10;
  inst.C.middleCols(3 * other, 3) = inst.C.middleCols(3 * inst.g_star, 3);
  const auto report = verify_single_group_pursuit(inst.C, inst.groups, inst.g_star, inst.x_star_g);
  EXPECT_EQ(report.verdict, Verdict::kNotApplicable);
  EXPECT_FALSE(report.assumptions_hold());
}

TEST(SingleGroupPursuitTest, RejectsBadPlantedBlock) {
  const auto groups = make_dipole_groups(2);
  EXPECT_THROW(verify_single_group_pursuit(Matrix::Identity(6, 6), groups, 0, Vector::Zero(3)),
               std::invalid_argument);
  EXPECT_THROW(verify_single_group_pursuit(Matrix::Identity(6, 6), groups, 0, Vector::Ones(2)),
               std::invalid_argument);
}

TEST(DisjointRecoveryTest, ConstructedInstancesPass) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (Index planted : {Index{2}, Index{3}}) {
      const auto inst = make_disjoint_instance(6, 3, 4, planted, 900 + seed);
      const auto report = verify_disjoint_recovery(inst.C, inst.groups, inst.planted, inst.x_star);
      EXPECT_EQ(report.verdict, Verdict::kPass) << "seed " << seed << " planted " << planted;
      EXPECT_LE(report.error_metrics.at("max_group_relative_error"), kRecoveryTolerance);
    }
  }
}

TEST(DisjointRecoveryTest, DenseOperatorIsNotApplicable) {
  const auto inst = make_single_group_instance(12, 10, 3, 31);
  const auto report =
      verify_disjoint_recovery(inst.C, inst.groups, {0, 1}, {Vector::Ones(3), Vector::Unit(3, 1)});
  EXPECT_EQ(report.verdict, Verdict::kNotApplicable);
  EXPECT_FALSE(report.notes.empty());
}

TEST(DisjointRecoveryTest, RandomMomentsOnOrthogonalBlocks) {
  const Matrix C = make_orthogonal_block_operator(5, 3, 3, 40);
  const auto groups = make_dipole_groups(5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::vector<Vector> x{oracle::gaussian(3, 41 + seed), oracle::gaussian(3, 61 + seed)};
    EXPECT_EQ(verify_disjoint_recovery(C, groups, {1, 4}, x).verdict, Verdict::kPass);
  }
}

TEST(GammaScalingTest, Fractions) {
  const auto inst = make_single_group_instance(12, 10, 3, 12);
  for (const std::vector<double>& fractions :
       {std::vector<double>{0.5}, std::vector<double>{1.0, 1.5}, std::vector<double>{0.01}}) {
    const auto report = verify_gamma_scaling(inst.C, inst.groups, inst.g_star, inst.x_star_g, fractions);
    EXPECT_EQ(report.verdict, Verdict::kPass);
    EXPECT_LE(report.error_metrics.at("max_gamma_deviation"), kGammaTolerance);
  }
  EXPECT_THROW(verify_gamma_scaling(inst.C, inst.groups, inst.g_star, inst.x_star_g, {0.0}), std::invalid_argument);
  EXPECT_THROW(verify_gamma_scaling(inst.C, inst.groups, inst.g_star, inst.x_star_g, {-0.2}),
               std::invalid_argument);
  EXPECT_THROW(verify_gamma_scaling(inst.C, inst.groups, inst.g_star, inst.x_star_g, {}), std::invalid_argument);
}

TEST(GammaScalingTest, ClosedFormOnSingleGroup) {
  const auto inst = make_single_group_instance(12, 10, 3, 13);
  Vector x_star = Vector::Zero(30);
  x_star.segment(3 * inst.g_star, 3) = inst.x_star_g;
  const ProblemInstance p(inst.C, inst.C * x_star, inst.groups);
  const double norm = (inst.C * x_star).norm();
  const auto r = bcd_solve(p, 0.5 * norm, Vector::Zero(30));
  EXPECT_LE((r.x - 0.5 * x_star).norm(), 1e-6 * x_star.norm());
}

TEST(TheoryPropertyTest, MinimizerIndependentOfWarmStart) {
  const auto inst = make_single_group_instance(12, 10, 3, 14);
  const ProblemInstance p(inst.C, oracle::gaussian(12, 15), inst.groups);
  SolverConfig tight;
  tight.tol_objective = 1e-16;
  tight.tol_x = 1e-13;
  tight.max_sweeps = 200'000;
  const double alpha = 0.3 * alpha_max(p);
  const Vector reference = bcd_solve(p, alpha, Vector::Zero(30), tight).x;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Vector x = bcd_solve(p, alpha, 5.0 * oracle::gaussian(30, 100 + seed), tight).x;
    EXPECT_LE((x - reference).norm(), 1e-8 * std::max(1.0, reference.norm())) << "start " << seed;
  }
}

TEST(TheoremSuiteTest, DefaultSuiteHolds) {
  TheoremSuiteOptions options;
  options.seeds = 5;
  const auto result = run_theorem_suite(options);
  EXPECT_TRUE(result.ok());
  EXPECT_EQ(result.passed, 20);
  EXPECT_EQ(result.informational, 2);
  for (const auto& c : result.cases) {
    if (c.informational) EXPECT_EQ(c.report.verdict, Verdict::kNotApplicable);
  }
  options.seeds = 0;
  EXPECT_THROW(run_theorem_suite(options), std::invalid_argument);
}

TEST(InstanceFactoryTest, Deterministic) {
  const auto a = make_single_group_instance(12, 10, 3, 99);
  const auto b = make_single_group_instance(12, 10, 3, 99);
  EXPECT_EQ(a.C, b.C);
  EXPECT_EQ(a.g_star, b.g_star);
  EXPECT_EQ(a.x_star_g, b.x_star_g);
  const auto d = make_disjoint_instance(6, 3, 4, 3, 99);
  EXPECT_EQ(d.planted.size(), 3u);
  EXPECT_TRUE(std::is_sorted(d.planted.begin(), d.planted.end()));
  EXPECT_THROW(make_disjoint_instance(6, 3, 4, 7, 99), std::invalid_argument);
}

}  // namespace
}  // namespace wgl
