#pragma once

#include <optional>
#include <string>

#include "wglasso/core_model.hpp"

namespace wgl {

enum class WeightingKind { kIdentity, kTruncatedPseudoinverse };

std::string to_string(WeightingKind kind);
WeightingKind weighting_kind_from_string(const std::string& tag);

/// The data-space weighting B applied on the left of A x = b.
struct WeightingOperator {
  WeightingKind kind = WeightingKind::kIdentity;
  Index k = 0;  // truncation rank; 0 for identity
  Matrix matrix;
  /// Orthonormal basis containing range(B) when it is cheaper than the full
  /// data space (V_k for the truncated pseudoinverse).
  std::optional<Matrix> range_basis;

  Index rows() const noexcept { return matrix.rows(); }
  Index cols() const noexcept { return matrix.cols(); }
};

WeightingOperator identity_weighting(Index m);

/// B = V_k S_k^-1 U_k^T from the SVD A = U S V^T. Throws RankError if
/// sigma_k <= 1e-12 sigma_1 and std::invalid_argument if k is outside
/// [1, min(m, n)].
WeightingOperator truncated_pseudoinverse(const Matrix& A, Index k);

/// round(150 * m / 228), clamped to [1, m].
Index default_truncation_rank(Index m);

/// C = B A and rhs = B b, with per-group factorizations cached.
ProblemInstance compose_problem(const Matrix& A, const WeightingOperator& B, const Vector& b,
                                const GroupStructure& groups);

/// Reuses the operator of `problem` (built from B) for new measurements b.
ProblemInstance rebind_measurement(const ProblemInstance& problem, const WeightingOperator& B, const Vector& b);

}  // namespace wgl
