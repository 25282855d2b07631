#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wgl {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

// Raised when randomized placement cannot satisfy its geometric constraints.
class CapacityError : public std::runtime_error {
 public:
  CapacityError(const std::string& constraint, const std::string& what)
      : std::runtime_error(what), constraint_(constraint) {}
  const std::string& constraint() const noexcept { return constraint_; }

 private:
  std::string constraint_;
};

// Raised when a dipole sits on top of an electrode.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankError : public std::runtime_error {
 public:
  RankError(Index effective_rank, const std::string& what)
      : std::runtime_error(what), effective_rank_(effective_rank) {}
  Index effective_rank() const noexcept { return effective_rank_; }

 private:
  Index effective_rank_;
};

/// Partition (not necessarily covering) of the unknown indices [0, n) into
/// non-empty, pairwise disjoint groups.
class GroupStructure {
 public:
  GroupStructure() = default;
  GroupStructure(std::vector<std::vector<Index>> groups, Index dimension);

  Index size() const noexcept { return static_cast<Index>(groups_.size()); }
  Index dimension() const noexcept { return dimension_; }
  std::span<const Index> operator[](Index g) const { return groups_.at(static_cast<std::size_t>(g)); }
  Index group_size(Index g) const { return static_cast<Index>((*this)[g].size()); }
  const std::vector<std::vector<Index>>& groups() const noexcept { return groups_; }

  /// True when every index in [0, n) belongs to some group.
  bool covers() const noexcept { return covers_; }
  /// Group id owning `index`, or -1.
  Index owner(Index index) const;

 private:
  std::vector<std::vector<Index>> groups_;
  std::vector<Index> owner_;
  Index dimension_ = 0;
  bool covers_ = false;
};

/// Groups {3j, 3j+1, 3j+2} for j in [0, num_positions).
GroupStructure make_dipole_groups(Index num_positions);

Vector subvector(const Vector& x, std::span<const Index> group);
void scatter(Vector& x, std::span<const Index> group, const Vector& values);

enum class ColumnLayout {
  // columns 3j, 3j+1, 3j+2 hold the x/y/z moments of position j
  kComponentMajor,
  // all x components, then all y, then all z: {j, j+p, j+2p}
  kCoordinateMajor,
};

std::string to_string(ColumnLayout layout);
ColumnLayout column_layout_from_string(const std::string& tag);

struct LeadField {
  Matrix entries;
  ColumnLayout layout = ColumnLayout::kComponentMajor;

  Index rows() const noexcept { return entries.rows(); }
  Index cols() const noexcept { return entries.cols(); }
  Index num_positions() const noexcept { return entries.cols() / 3; }

  /// Throws std::invalid_argument on non-finite entries or m >= n.
  void validate() const;
};

/// Permutes the columns of a component-major matrix into `layout`, or back.
Matrix to_layout(const Matrix& component_major, ColumnLayout layout);
Matrix from_layout(const Matrix& columns, ColumnLayout layout);

class DipoleSource {
 public:
  DipoleSource(Vec3 position, Vec3 moment, Index group_id);

  const Vec3& position() const noexcept { return position_; }
  const Vec3& moment() const noexcept { return moment_; }
  Index group_id() const noexcept { return group_id_; }

 private:
  Vec3 position_;
  Vec3 moment_;
  Index group_id_;
};

/// Thin factorization C_g = basis * coefficients, with `basis` orthonormal
/// (expressed in the problem's reduced coordinates) and `solve` the
/// minimum-norm inverse of `coefficients`.
struct GroupFactor {
  Matrix basis;         // r x rank
  Matrix coefficients;  // rank x |g|   (= S W^T)
  Matrix solve;         // |g| x rank   (= W S^-1)
  Index rank = 0;
};

/// Relative singular-value cutoff for per-group numerical rank.
inline constexpr double kGroupRankTolerance = 1e-10;

/// The composed problem min 1/2 ||C x - rhs||^2 + alpha sum_g ||C_g x_g||.
///
/// C is stored densely. When the caller knows an orthonormal frame F with
/// range(C) and range(rhs) inside range(F), the solver works on the reduced
/// operator F^T C instead; all norms in the objective are unchanged by this.
/// Copies share the operator; only the data vector is per instance.
class ProblemInstance {
 public:
  ProblemInstance(Matrix C, Vector rhs, GroupStructure groups,
                  std::optional<Matrix> frame = std::nullopt);

  const Matrix& C() const noexcept { return op_->C; }
  const Vector& rhs() const noexcept { return rhs_; }
  const GroupStructure& groups() const noexcept { return op_->groups; }
  Index rows() const noexcept { return op_->C.rows(); }
  Index cols() const noexcept { return op_->C.cols(); }

  const GroupFactor& factor(Index g) const { return op_->factors.at(static_cast<std::size_t>(g)); }
  /// Orthonormal basis Q_g of range(C_g) in the full q-dimensional data space.
  Matrix range_basis(Index g) const;
  /// Thin reconstruction Q_g * coefficients of C_g.
  Matrix reconstruct_group(Index g) const;

  const Matrix& reduced_operator() const noexcept { return op_->reduced; }
  const Vector& reduced_rhs() const noexcept { return reduced_rhs_; }
  /// ||rhs||^2 - ||reduced_rhs||^2, the part of the data outside the frame.
  double rhs_offset_squared() const noexcept { return rhs_offset_sq_; }
  Vector to_reduced(const Vector& data_space) const;

  /// Same operator, new data vector (already transformed by B). Drops any
  /// attached original-space data.
  ProblemInstance with_rhs(Vector rhs) const;
  /// Same operator and original A, new transformed and original data.
  ProblemInstance with_data(Vector rhs, Vector original_b) const;

  /// Optional original-space pair (A, b) used for discrepancy reporting.
  void attach_original(std::shared_ptr<const Matrix> A, Vector b);
  bool has_original() const noexcept { return original_ != nullptr; }
  const Matrix& original_operator() const { return *original_; }
  const Vector& original_data() const noexcept { return original_data_; }

 private:
  struct Operator {
    Matrix C;
    std::optional<Matrix> frame;
    Matrix reduced;
    GroupStructure groups;
    std::vector<GroupFactor> factors;
  };

  ProblemInstance() = default;
  void bind_rhs(Vector rhs);

  std::shared_ptr<const Operator> op_;
  Vector rhs_;
  Vector reduced_rhs_;
  double rhs_offset_sq_ = 0.0;
  std::shared_ptr<const Matrix> original_;
  Vector original_data_;
};

struct SolveResult {
  Vector x;
  double alpha = 0.0;
  double objective = 0.0;
  double discrepancy_original = 0.0;
  double discrepancy_transformed = 0.0;
  int iterations = 0;
  bool converged = false;
  bool monotone = true;
  std::vector<Index> active_groups;
  double kkt_residual = 0.0;
  std::string termination;
};

/// Relative support threshold: ||x_g|| > 1e-8 * max_g ||x_g||.
inline constexpr double kActivityThreshold = 1e-8;

std::vector<Index> active_groups(const Vector& x, const GroupStructure& groups);

}  // namespace wgl
