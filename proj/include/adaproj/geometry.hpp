#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace adaproj {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Below this Euclidean norm a vector is treated as zero.
inline constexpr double kNormEpsilon = 1e-12;

/// A point on the unit sphere S^{D-1}.
class EmbeddingVector {
 public:
  /// Wraps `values` after checking that its norm is 1 within `tolerance`.
  static EmbeddingVector from_unit(Vector values, double tolerance = 1e-6);

  const Vector& values() const noexcept { return values_; }
  Eigen::Index dim() const noexcept { return values_.size(); }

 private:
  explicit EmbeddingVector(Vector values) : values_(std::move(values)) {}
  friend EmbeddingVector sphere_project(const Vector& x);

  Vector values_;
};

/// J x D matrix whose rows are pairwise orthonormal, with J < D.
class SubspaceBasis {
 public:
  /// Checks the Gram matrix against the identity within `tolerance`.
  static SubspaceBasis from_orthonormal_rows(Matrix rows, double tolerance = 1e-6);

  const Matrix& rows() const noexcept { return rows_; }
  Eigen::Index subspace_dim() const noexcept { return rows_.rows(); }
  Eigen::Index ambient_dim() const noexcept { return rows_.cols(); }

 private:
  explicit SubspaceBasis(Matrix rows) : rows_(std::move(rows)) {}
  friend SubspaceBasis orthonormalize(const Matrix& raw_rows);

  Matrix rows_;
};

/// x / ||x||. Throws ZeroVector when ||x|| <= kNormEpsilon.
EmbeddingVector sphere_project(const Vector& x);

/// Orthogonal projection onto the row span: sum_j <x, c_j> c_j.
Vector span_project(const Vector& x, const SubspaceBasis& basis);

/// Cosine between x and its projection onto the span, in [0, 1].
/// Returns 0 when the projection is numerically zero.
double subspace_cosine(const Vector& x, const SubspaceBasis& basis);

/// Gram-Schmidt (with one re-orthogonalization pass) over the rows.
/// Preserves the row span and row order. Throws RankDeficient / InvalidDims.
SubspaceBasis orthonormalize(const Matrix& raw_rows);

/// Glorot-uniform J x D draw, orthonormalized. Deterministic in `seed`.
SubspaceBasis random_basis(Eigen::Index subspace_dim, Eigen::Index ambient_dim, std::uint64_t seed);

/// Glorot-uniform rows x cols matrix: U(-a, a) with a = sqrt(6 / (rows + cols)).
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

// The same two operations for arbitrary center rows (not necessarily
// orthonormal). Used by the raw-Glorot center ablation.
Vector center_projection(const Vector& x, const Matrix& centers);
double projection_cosine(const Vector& x, const Matrix& centers);

}  // namespace adaproj
