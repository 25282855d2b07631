#include "wglasso/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace wgl {

std::string to_string(WeightingKind kind) {
  switch (kind) {
    case WeightingKind::kIdentity:
      return "identity";
    case WeightingKind::kTruncatedPseudoinverse:
      return "truncated_pseudoinverse";
  }
  return "unknown";
}

WeightingKind weighting_kind_from_string(const std::string& tag) {
  if (tag == "identity") return WeightingKind::kIdentity;
  if (tag == "truncated_pseudoinverse" || tag == "truncated") return WeightingKind::kTruncatedPseudoinverse;
  throw std::invalid_argument("unknown weighting kind '" + tag + "'");
}

WeightingOperator identity_weighting(Index m) {
  if (m < 1) throw std::invalid_argument("identity_weighting: empty data space");
  WeightingOperator B;
  B.kind = WeightingKind::kIdentity;
  B.matrix = Matrix::Identity(m, m);
  return B;
}

WeightingOperator truncated_pseudoinverse(const Matrix& A, Index k) {
  const Index limit = std::min(A.rows(), A.cols());
  if (k < 1 || k > limit) {
    throw std::invalid_argument("truncated_pseudoinverse: k = " + std::to_string(k) + " outside [1, " +
                                std::to_string(limit) + "]");
  }
  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (!(s[k - 1] > 1e-12 * s[0])) {
    Index effective = 0;
    while (effective < s.size() && s[effective] > 1e-12 * s[0]) ++effective;
    throw RankError(effective, "truncated_pseudoinverse: k = " + std::to_string(k) + " exceeds numerical rank " +
                                   std::to_string(effective));
  }
  WeightingOperator B;
  B.kind = WeightingKind::kTruncatedPseudoinverse;
  B.k = k;
  const Matrix Vk = svd.matrixV().leftCols(k);
  B.matrix = Vk * s.head(k).cwiseInverse().asDiagonal() * svd.matrixU().leftCols(k).transpose();
  B.range_basis = Vk;
  return B;
}

Index default_truncation_rank(Index m) {
  const auto k = static_cast<Index>(std::lround(150.0 * static_cast<double>(m) / 228.0));
  return std::clamp<Index>(k, 1, std::max<Index>(m, 1));
}

ProblemInstance compose_problem(const Matrix& A, const WeightingOperator& B, const Vector& b,
                                const GroupStructure& groups) {
  if (B.cols() != A.rows()) {
    throw std::invalid_argument("compose_problem: B has " + std::to_string(B.cols()) + " columns but A has " +
                                std::to_string(A.rows()) + " rows");
  }
  if (b.size() != A.rows()) throw std::invalid_argument("compose_problem: measurement length mismatch");
  if (groups.dimension() != A.cols()) throw std::invalid_argument("compose_problem: group dimension mismatch");

  Matrix C;
  Vector rhs;
  if (B.kind == WeightingKind::kIdentity) {
    C = A;
    rhs = b;
  } else {
    C = B.matrix * A;
    rhs = B.matrix * b;
  }
  ProblemInstance problem(std::move(C), std::move(rhs), groups, B.range_basis);
  problem.attach_original(std::make_shared<const Matrix>(A), b);
  return problem;
}

ProblemInstance rebind_measurement(const ProblemInstance& problem, const WeightingOperator& B, const Vector& b) {
  if (B.cols() != b.size() || B.rows() != problem.rows()) {
    throw std::invalid_argument("rebind_measurement: dimension mismatch");
  }
  Vector rhs = B.kind == WeightingKind::kIdentity ? b : Vector(B.matrix * b);
  if (problem.has_original()) return problem.with_data(std::move(rhs), b);
  return problem.with_rhs(std::move(rhs));
}

}  // namespace wgl
