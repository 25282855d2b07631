#include "wglasso/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace wgl {

GroupStructure::GroupStructure(std::vector<std::vector<Index>> groups, Index dimension)
    : groups_(std::move(groups)), owner_(static_cast<std::size_t>(std::max<Index>(dimension, 0)), -1),
      dimension_(dimension) {
  if (dimension < 0) throw std::invalid_argument("GroupStructure: negative dimension");
  Index covered = 0;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    if (groups_[g].empty()) {
      throw std::invalid_argument("GroupStructure: group " + std::to_string(g) + " is empty");
    }
    for (Index i : groups_[g]) {
      if (i < 0 || i >= dimension) {
        throw std::invalid_argument("GroupStructure: index " + std::to_string(i) +
                                    " outside [0, " + std::to_string(dimension) + ")");
      }
      auto& slot = owner_[static_cast<std::size_t>(i)];
      if (slot != -1) {
        throw std::invalid_argument("GroupStructure: index " + std::to_string(i) +
                                    " belongs to groups " + std::to_string(slot) + " and " +
                                    std::to_string(g));
      }
      slot = static_cast<Index>(g);
      ++covered;
    }
  }
  covers_ = covered == dimension;
}

Index GroupStructure::owner(Index index) const {
  if (index < 0 || index >= dimension_) return -1;
  return owner_[static_cast<std::size_t>(index)];
}

GroupStructure make_dipole_groups(Index num_positions) {
  if (num_positions < 1) throw std::invalid_argument("make_dipole_groups: need at least one position");
  std::vector<std::vector<Index>> groups(static_cast<std::size_t>(num_positions));
  for (Index j = 0; j < num_positions; ++j) {
    groups[static_cast<std::size_t>(j)] = {3 * j, 3 * j + 1, 3 * j + 2};
  }
  return GroupStructure(std::move(groups), 3 * num_positions);
}

Vector subvector(const Vector& x, std::span<const Index> group) {
  Vector out(static_cast<Index>(group.size()));
  for (std::size_t k = 0; k < group.size(); ++k) {
    const Index i = group[k];
    if (i < 0 || i >= x.size()) throw std::invalid_argument("subvector: index out of range");
    out[static_cast<Index>(k)] = x[i];
  }
  return out;
}

void scatter(Vector& x, std::span<const Index> group, const Vector& values) {
  if (values.size() != static_cast<Index>(group.size())) {
    throw std::invalid_argument("scatter: value count does not match group size");
  }
  for (std::size_t k = 0; k < group.size(); ++k) {
    const Index i = group[k];
    if (i < 0 || i >= x.size()) throw std::invalid_argument("scatter: index out of range");
    x[i] = values[static_cast<Index>(k)];
  }
}

std::string to_string(ColumnLayout layout) {
  switch (layout) {
    case ColumnLayout::kComponentMajor:
      return "component_major";
    case ColumnLayout::kCoordinateMajor:
      return "coordinate_major";
  }
  return "unknown";
}

ColumnLayout column_layout_from_string(const std::string& tag) {
  if (tag == "component_major") return ColumnLayout::kComponentMajor;
  if (tag == "coordinate_major") return ColumnLayout::kCoordinateMajor;
  throw std::invalid_argument("unknown column layout '" + tag + "'");
}

void LeadField::validate() const {
  if (!entries.allFinite()) throw std::invalid_argument("LeadField: non-finite entry");
  if (entries.rows() >= entries.cols()) {
    throw std::invalid_argument("LeadField: expected m < n, got " + std::to_string(entries.rows()) +
                                "x" + std::to_string(entries.cols()));
  }
}

namespace {

// Column of the coordinate-major matrix holding component c of position j.
Index coordinate_major_column(Index j, Index c, Index positions) { return j + c * positions; }

}  // namespace

Matrix to_layout(const Matrix& component_major, ColumnLayout layout) {
  if (layout == ColumnLayout::kComponentMajor) return component_major;
  if (component_major.cols() % 3 != 0) throw std::invalid_argument("to_layout: column count not a multiple of 3");
  const Index p = component_major.cols() / 3;
  Matrix out(component_major.rows(), component_major.cols());
  for (Index j = 0; j < p; ++j) {
    for (Index c = 0; c < 3; ++c) {
      out.col(coordinate_major_column(j, c, p)) = component_major.col(3 * j + c);
    }
  }
  return out;
}

Matrix from_layout(const Matrix& columns, ColumnLayout layout) {
  if (layout == ColumnLayout::kComponentMajor) return columns;
  if (columns.cols() % 3 != 0) throw std::invalid_argument("from_layout: column count not a multiple of 3");
  const Index p = columns.cols() / 3;
  Matrix out(columns.rows(), columns.cols());
  for (Index j = 0; j < p; ++j) {
    for (Index c = 0; c < 3; ++c) {
      out.col(3 * j + c) = columns.col(coordinate_major_column(j, c, p));
    }
  }
  return out;
}

DipoleSource::DipoleSource(Vec3 position, Vec3 moment, Index group_id)
    : position_(std::move(position)), moment_(std::move(moment)), group_id_(group_id) {
  if (moment_.isZero(0.0)) throw std::invalid_argument("DipoleSource: zero moment");
  if (group_id_ < 0) throw std::invalid_argument("DipoleSource: negative group id");
}

namespace {

GroupFactor factorize_group(const Matrix& block) {
  Eigen::JacobiSVD<Matrix> svd(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  GroupFactor f;
  const double cutoff = s.size() > 0 ? kGroupRankTolerance * s[0] : 0.0;
  Index rank = 0;
  while (rank < s.size() && s[rank] > cutoff && s[rank] > 0.0) ++rank;
  f.rank = rank;
  f.basis = svd.matrixU().leftCols(rank);
  const Matrix w = svd.matrixV().leftCols(rank);
  f.coefficients = s.head(rank).asDiagonal() * w.transpose();
  f.solve = w * s.head(rank).cwiseInverse().asDiagonal();
  return f;
}

}  // namespace

ProblemInstance::ProblemInstance(Matrix C, Vector rhs, GroupStructure groups, std::optional<Matrix> frame) {
  if (C.rows() != rhs.size()) throw std::invalid_argument("ProblemInstance: rhs length does not match C rows");
  if (C.cols() != groups.dimension()) {
    throw std::invalid_argument("ProblemInstance: group dimension does not match C columns");
  }
  if (frame && frame->rows() != C.rows()) throw std::invalid_argument("ProblemInstance: frame row mismatch");

  auto op = std::make_shared<Operator>();
  op->C = std::move(C);
  op->frame = std::move(frame);
  op->reduced = op->frame ? Matrix(op->frame->transpose() * op->C) : op->C;
  op->groups = std::move(groups);
  op->factors.reserve(static_cast<std::size_t>(op->groups.size()));
  for (Index g = 0; g < op->groups.size(); ++g) {
    const auto idx = op->groups[g];
    Matrix block(op->reduced.rows(), static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) block.col(static_cast<Index>(k)) = op->reduced.col(idx[k]);
    op->factors.push_back(factorize_group(block));
  }
  op_ = std::move(op);
  bind_rhs(std::move(rhs));
}

void ProblemInstance::bind_rhs(Vector rhs) {
  if (rhs.size() != op_->C.rows()) throw std::invalid_argument("ProblemInstance: rhs length does not match C rows");
  rhs_ = std::move(rhs);
  reduced_rhs_ = to_reduced(rhs_);
  rhs_offset_sq_ = op_->frame ? std::max(0.0, rhs_.squaredNorm() - reduced_rhs_.squaredNorm()) : 0.0;
}

Vector ProblemInstance::to_reduced(const Vector& data_space) const {
  if (!op_->frame) return data_space;
  return op_->frame->transpose() * data_space;
}

Matrix ProblemInstance::range_basis(Index g) const {
  const auto& f = factor(g);
  if (!op_->frame) return f.basis;
  return *op_->frame * f.basis;
}

Matrix ProblemInstance::reconstruct_group(Index g) const { return range_basis(g) * factor(g).coefficients; }

ProblemInstance ProblemInstance::with_rhs(Vector rhs) const {
  ProblemInstance out;
  out.op_ = op_;
  out.bind_rhs(std::move(rhs));
  return out;
}

ProblemInstance ProblemInstance::with_data(Vector rhs, Vector original_b) const {
  if (!original_) throw std::logic_error("with_data: no original operator attached");
  ProblemInstance out = with_rhs(std::move(rhs));
  out.attach_original(original_, std::move(original_b));
  return out;
}

void ProblemInstance::attach_original(std::shared_ptr<const Matrix> A, Vector b) {
  if (!A || A->cols() != cols() || A->rows() != b.size()) {
    throw std::invalid_argument("attach_original: dimension mismatch");
  }
  original_ = std::move(A);
  original_data_ = std::move(b);
}

std::vector<Index> active_groups(const Vector& x, const GroupStructure& groups) {
  std::vector<double> norms(static_cast<std::size_t>(groups.size()));
  double largest = 0.0;
  for (Index g = 0; g < groups.size(); ++g) {
    double s = 0.0;
    for (Index i : groups[g]) s += x[i] * x[i];
    norms[static_cast<std::size_t>(g)] = std::sqrt(s);
    largest = std::max(largest, norms[static_cast<std::size_t>(g)]);
  }
  std::vector<Index> out;
  if (largest == 0.0) return out;
  for (Index g = 0; g < groups.size(); ++g) {
    if (norms[static_cast<std::size_t>(g)] > kActivityThreshold * largest) out.push_back(g);
  }
  return out;
}

}  // namespace wgl
