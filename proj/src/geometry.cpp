#include "adaproj/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "adaproj/error.hpp"

namespace adaproj {
namespace {

void require_finite(const Vector& x) {
  if (!x.allFinite()) throw Error(ErrorKind::DataError, "vector has non-finite entries");
}

}  // namespace

EmbeddingVector EmbeddingVector::from_unit(Vector values, double tolerance) {
  require_finite(values);
  const double norm = values.norm();
  if (std::abs(norm - 1.0) > tolerance) {
    throw Error(ErrorKind::DataError, "embedding norm " + std::to_string(norm) + " is not 1");
  }
  return EmbeddingVector(std::move(values));
}

SubspaceBasis SubspaceBasis::from_orthonormal_rows(Matrix rows, double tolerance) {
  if (rows.rows() < 1 || rows.rows() >= rows.cols()) {
    throw Error(ErrorKind::InvalidDims, "subspace dimension must satisfy 1 <= J < D");
  }
  const Matrix gram = rows * rows.transpose();
  const double err = (gram - Matrix::Identity(rows.rows(), rows.rows())).cwiseAbs().maxCoeff();
  if (!(err <= tolerance)) {
    throw Error(ErrorKind::RankDeficient, "rows are not orthonormal (max Gram error " +
                                              std::to_string(err) + ")");
  }
  return SubspaceBasis(std::move(rows));
}

EmbeddingVector sphere_project(const Vector& x) {
  require_finite(x);
  const double norm = x.norm();
  if (norm <= kNormEpsilon) throw Error(ErrorKind::ZeroVector, "cannot project zero vector onto the sphere");
  return EmbeddingVector(x / norm);
}

Vector span_project(const Vector& x, const SubspaceBasis& basis) {
  return center_projection(x, basis.rows());
}

double subspace_cosine(const Vector& x, const SubspaceBasis& basis) {
  return projection_cosine(x, basis.rows());
}

Vector center_projection(const Vector& x, const Matrix& centers) {
  if (x.size() != centers.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "vector has dim " + std::to_string(x.size()) +
                                                  ", centers have dim " + std::to_string(centers.cols()));
  }
  return centers.transpose() * (centers * x);
}

double projection_cosine(const Vector& x, const Matrix& centers) {
  const Vector unit = sphere_project(x).values();
  const Vector projected = center_projection(unit, centers);
  const double projected_norm = projected.norm();
  if (projected_norm <= kNormEpsilon) return 0.0;
  return std::clamp(unit.dot(projected) / projected_norm, 0.0, 1.0);
}

SubspaceBasis orthonormalize(const Matrix& raw_rows) {
  const Eigen::Index rows = raw_rows.rows();
  const Eigen::Index dim = raw_rows.cols();
  if (rows < 1 || rows >= dim) {
    throw Error(ErrorKind::InvalidDims, "need 1 <= J < D, got J=" + std::to_string(rows) +
                                            " D=" + std::to_string(dim));
  }
  if (!raw_rows.allFinite()) throw Error(ErrorKind::DataError, "basis has non-finite entries");

  Matrix q = raw_rows;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double original_norm = raw_rows.row(i).norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < i; ++j) {
        q.row(i) -= q.row(i).dot(q.row(j)) * q.row(j);
      }
    }
    const double norm = q.row(i).norm();
    if (norm <= 1e-10 * original_norm || norm <= kNormEpsilon) {
      throw Error(ErrorKind::RankDeficient, "row " + std::to_string(i) + " is linearly dependent");
    }
    q.row(i) /= norm;
  }
  return SubspaceBasis(std::move(q));
}

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> uniform(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform(rng);
  }
  return m;
}

SubspaceBasis random_basis(Eigen::Index subspace_dim, Eigen::Index ambient_dim, std::uint64_t seed) {
  if (subspace_dim < 1 || subspace_dim >= ambient_dim) {
    throw Error(ErrorKind::InvalidDims, "need 1 <= J < D, got J=" + std::to_string(subspace_dim) +
                                            " D=" + std::to_string(ambient_dim));
  }
  return orthonormalize(glorot_uniform(subspace_dim, ambient_dim, seed));
}

}  // namespace adaproj
