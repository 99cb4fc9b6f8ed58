#include "adaproj/loss_heads.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "adaproj/error.hpp"
#include "adaproj/random.hpp"

namespace adaproj {
namespace {

// Logits together with d logit_k / d x (one row per class).
struct LogitJacobian {
  Vector logits;
  Matrix jacobian;
};

Matrix unit_rows(Matrix m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r).normalize();
  return m;
}

void check_dims(const Vector& x, const CenterBank& bank) {
  if (x.size() != bank.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "embedding dim " + std::to_string(x.size()) +
                                                  " vs bank dim " + std::to_string(bank.dim()));
  }
}

struct Normalized {
  Vector unit;
  double norm;
};

Normalized normalize(const Vector& x) {
  const EmbeddingVector e = sphere_project(x);
  return {e.values(), x.norm()};
}

// d<x/|x|, c>/dx = (c - cos * x_hat) / |x|
LogitJacobian cosine_logits(const Vector& x, const CenterBank& bank, double s_hat) {
  check_dims(x, bank);
  const auto [unit, norm] = normalize(x);
  const int n = bank.num_classes();
  LogitJacobian out{Vector(n), Matrix(n, x.size())};
  for (int k = 0; k < n; ++k) {
    const Matrix& c = bank.centers(k);
    if (c.rows() != 1) throw Error(ErrorKind::DataError, "AdaCos logits need exactly one center per class");
    const double cosine = c.row(0).dot(unit);
    out.logits(k) = s_hat * cosine;
    out.jacobian.row(k) = s_hat * (c.row(0) - cosine * unit.transpose()) / norm;
  }
  return out;
}

LogitJacobian subcluster_logits(const Vector& x, const CenterBank& bank, double s_hat) {
  check_dims(x, bank);
  if (bank.kind() == CenterBank::Kind::Subspace) {
    throw Error(ErrorKind::DataError, "sub-cluster logits need a center bank, not subspaces");
  }
  const auto [unit, norm] = normalize(x);
  const int n = bank.num_classes();
  LogitJacobian out{Vector(n), Matrix(n, x.size())};
  for (int k = 0; k < n; ++k) {
    const Matrix& c = bank.centers(k);
    const Vector cosines = c * unit;
    const Vector scaled = s_hat * cosines;
    const double peak = scaled.maxCoeff();
    const Vector shifted = (scaled.array() - peak).exp().matrix();
    const double total = shifted.sum();
    out.logits(k) = peak + std::log(total) - std::log(static_cast<double>(c.rows()));
    const Vector weights = shifted / total;
    const double mean_cos = weights.dot(cosines);
    out.jacobian.row(k) = s_hat * (c.transpose() * weights - mean_cos * unit).transpose() / norm;
  }
  return out;
}

// Distance logits s * 2 (1 - cos_k) with cos_k = <x, Gx> / (|x| |Gx|), G = C^T C.
// For orthonormal rows G is the orthogonal projector and cos_k = |G x_hat|.
LogitJacobian subspace_logits(const Vector& x, const CenterBank& bank, double s_hat) {
  check_dims(x, bank);
  if (bank.kind() != CenterBank::Kind::Subspace) {
    throw Error(ErrorKind::DataError, "AdaProj logits need subspace centers");
  }
  const auto [unit, norm] = normalize(x);
  const int n = bank.num_classes();
  LogitJacobian out{Vector(n), Matrix(n, x.size())};
  for (int k = 0; k < n; ++k) {
    const Matrix& c = bank.centers(k);
    const Vector coeffs = c * unit;
    const Vector projected = c.transpose() * coeffs;
    const double projected_norm = projected.norm();
    if (projected_norm <= kNormEpsilon) {
      out.logits(k) = 2.0 * s_hat;
      out.jacobian.row(k).setZero();
      continue;
    }
    const double raw_cos = unit.dot(projected) / projected_norm;
    const double cosine = std::clamp(raw_cos, 0.0, 1.0);
    out.logits(k) = s_hat * 2.0 * (1.0 - cosine);
    // Gradient of the scale-invariant cosine, written on the unit vector and divided by |x|.
    const Vector projected_twice = c.transpose() * (c * projected);
    const Vector dcos = (2.0 * projected / projected_norm -
                         raw_cos * (unit + projected_twice / (projected_norm * projected_norm))) /
                        norm;
    out.jacobian.row(k) = -2.0 * s_hat * dcos.transpose();
  }
  return out;
}

LogitJacobian softmax_logits(const Vector& x, const CenterBank& bank, const AdaptiveScaleState& scale,
                             const HeadSettings& settings) {
  switch (settings.head) {
    case LossHead::Compactness:
    case LossHead::CompactnessCce:
    case LossHead::AdaCos:
      return cosine_logits(x, bank, scale.s_hat);
    case LossHead::SubclusterAdaCos:
      return subcluster_logits(x, bank, scale.s_hat);
    case LossHead::AdaProj: {
      LogitJacobian lj = subspace_logits(x, bank, scale.s_hat);
      if (settings.negate_distance) {
        lj.logits = -lj.logits;
        lj.jacobian = -lj.jacobian;
      }
      return lj;
    }
  }
  throw Error(ErrorKind::ConfigInvalid, "unknown loss head");
}

void check_target(const TargetDistribution& target, const CenterBank& bank) {
  if (target.num_classes() != bank.num_classes()) {
    throw Error(ErrorKind::DimensionMismatch, "target has " + std::to_string(target.num_classes()) +
                                                  " classes, bank has " + std::to_string(bank.num_classes()));
  }
}

// Sum of per-class compactness losses weighted by the target.
LossOutput weighted_compactness(const Vector& x, const TargetDistribution& target, const CenterBank& bank) {
  LossOutput total{0.0, Vector::Zero(x.size())};
  for (int k = 0; k < bank.num_classes(); ++k) {
    const double w = target.weights()(k);
    if (w == 0.0) continue;
    const Matrix& c = bank.centers(k);
    if (c.rows() != 1) throw Error(ErrorKind::DataError, "compactness needs exactly one center per class");
    const LossOutput part = compactness_loss(x, EmbeddingVector::from_unit(c.row(0).transpose()));
    total.value += w * part.value;
    total.gradient += w * part.gradient;
  }
  return total;
}

}  // namespace

std::string_view to_string(LossHead head) {
  switch (head) {
    case LossHead::Compactness: return "compactness";
    case LossHead::CompactnessCce: return "compactness_cce";
    case LossHead::AdaCos: return "adacos";
    case LossHead::SubclusterAdaCos: return "subcluster_adacos";
    case LossHead::AdaProj: return "adaproj";
  }
  return "unknown";
}

LossHead parse_loss_head(std::string_view name) {
  for (LossHead head : kAllLossHeads) {
    if (to_string(head) == name) return head;
  }
  throw Error(ErrorKind::ConfigInvalid, "unknown loss head '" + std::string(name) + "'");
}

CenterBank CenterBank::single(int num_classes, Eigen::Index dim, std::uint64_t seed) {
  CenterBank bank = subclusters(num_classes, 1, dim, seed);
  bank.kind_ = Kind::Single;
  return bank;
}

CenterBank CenterBank::subclusters(int num_classes, int per_class, Eigen::Index dim, std::uint64_t seed) {
  if (num_classes < 1 || per_class < 1 || dim < 2) {
    throw Error(ErrorKind::InvalidDims, "center bank needs N >= 1, M >= 1, D >= 2");
  }
  std::vector<Matrix> centers;
  centers.reserve(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    centers.push_back(unit_rows(glorot_uniform(per_class, dim, derive_seed(seed, k))));
  }
  return CenterBank(Kind::SubClusters, std::move(centers));
}

CenterBank CenterBank::subspaces(int num_classes, int subspace_dim, Eigen::Index dim, std::uint64_t seed,
                                 CenterInit init) {
  if (num_classes < 1) throw Error(ErrorKind::InvalidDims, "center bank needs N >= 1");
  if (subspace_dim < 1 || subspace_dim >= dim) {
    throw Error(ErrorKind::InvalidDims, "subspace dimension must satisfy 1 <= J < D, got J=" +
                                            std::to_string(subspace_dim) + " D=" + std::to_string(dim));
  }
  std::vector<Matrix> centers;
  centers.reserve(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    const std::uint64_t class_seed = derive_seed(seed, k);
    if (init == CenterInit::Orthonormal) {
      centers.push_back(random_basis(subspace_dim, dim, class_seed).rows());
    } else {
      centers.push_back(unit_rows(glorot_uniform(subspace_dim, dim, class_seed)));
    }
  }
  return CenterBank(Kind::Subspace, std::move(centers));
}

CenterBank CenterBank::from_centers(Kind kind, std::vector<Matrix> centers) {
  if (centers.empty()) throw Error(ErrorKind::InvalidDims, "center bank needs N >= 1");
  const Eigen::Index dim = centers.front().cols();
  for (const Matrix& c : centers) {
    if (c.cols() != dim || c.rows() < 1 || dim < 2) {
      throw Error(ErrorKind::DimensionMismatch, "every class needs at least one center of the shared dim");
    }
    if (kind == Kind::Single && c.rows() != 1) throw Error(ErrorKind::InvalidDims, "single bank needs one row");
    if (kind == Kind::Subspace && c.rows() >= dim) throw Error(ErrorKind::InvalidDims, "subspace needs J < D");
    if (((c.rowwise().norm().array() - 1.0).abs() > 1e-6).any()) {
      throw Error(ErrorKind::DataError, "centers must be unit norm");
    }
  }
  return CenterBank(kind, std::move(centers));
}

CenterBank CenterBank::for_head(LossHead head, int num_classes, Eigen::Index dim, int subspace_dim,
                                int subclusters, std::uint64_t seed, CenterInit init) {
  switch (head) {
    case LossHead::Compactness:
    case LossHead::CompactnessCce:
    case LossHead::AdaCos:
      return single(num_classes, dim, seed);
    case LossHead::SubclusterAdaCos:
      return CenterBank::subclusters(num_classes, subclusters, dim, seed);
    case LossHead::AdaProj:
      return subspaces(num_classes, subspace_dim, dim, seed, init);
  }
  throw Error(ErrorKind::ConfigInvalid, "unknown loss head");
}

std::uint64_t CenterBank::fingerprint() const {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  auto mix = [&hash](const unsigned char* bytes, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      hash ^= bytes[i];
      hash *= 0x100000001B3ULL;
    }
  };
  for (const Matrix& m : centers_) {
    const Eigen::Index shape[2] = {m.rows(), m.cols()};
    mix(reinterpret_cast<const unsigned char*>(shape), sizeof(shape));
    mix(reinterpret_cast<const unsigned char*>(m.data()), sizeof(double) * static_cast<std::size_t>(m.size()));
  }
  return hash;
}

AdaptiveScaleState AdaptiveScaleState::initial(int num_classes, bool frozen) {
  const double others = std::max(num_classes - 1, 2);
  return {std::numbers::sqrt2 * std::log(others), num_classes, frozen};
}

TargetDistribution TargetDistribution::one_hot(int num_classes, int class_index) {
  if (class_index < 0 || class_index >= num_classes) {
    throw Error(ErrorKind::DataError, "class index " + std::to_string(class_index) + " out of range");
  }
  Vector w = Vector::Zero(num_classes);
  w(class_index) = 1.0;
  return TargetDistribution(std::move(w));
}

TargetDistribution TargetDistribution::mixed(int num_classes, int first, int second, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorKind::DataError, "mixing coefficient outside [0, 1]");
  Vector w = lambda * one_hot(num_classes, first).weights();
  w(second) += 1.0 - lambda;
  return TargetDistribution(std::move(w));
}

TargetDistribution TargetDistribution::from_weights(Vector weights) {
  if (weights.size() < 1 || !weights.allFinite() || weights.minCoeff() < 0.0 ||
      std::abs(weights.sum() - 1.0) > 1e-9) {
    throw Error(ErrorKind::DataError, "target weights must be nonnegative and sum to 1");
  }
  return TargetDistribution(std::move(weights));
}

int TargetDistribution::dominant_class() const {
  Eigen::Index best = 0;
  weights_.maxCoeff(&best);
  return static_cast<int>(best);
}

Vector adaproj_logits(const Vector& x, const CenterBank& bank, const AdaptiveScaleState& scale) {
  return subspace_logits(x, bank, scale.s_hat).logits;
}

Vector adacos_logits(const Vector& x, const CenterBank& bank, const AdaptiveScaleState& scale) {
  return cosine_logits(x, bank, scale.s_hat).logits;
}

Vector subcluster_adacos_logits(const Vector& x, const CenterBank& bank, const AdaptiveScaleState& scale) {
  return subcluster_logits(x, bank, scale.s_hat).logits;
}

LossOutput compactness_loss(const Vector& x, const EmbeddingVector& class_center) {
  if (x.size() != class_center.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "embedding and center dims differ");
  }
  const auto [unit, norm] = normalize(x);
  const Vector& c = class_center.values();
  const double cosine = unit.dot(c);
  // |u - c|^2 = 2 - 2 <u, c> for unit u and c.
  return {(unit - c).squaredNorm(), -2.0 * (c - cosine * unit) / norm};
}

LossOutput softmax_cce(const Vector& logits, const TargetDistribution& target) {
  if (logits.size() != target.num_classes()) {
    throw Error(ErrorKind::DimensionMismatch, "logit count differs from target class count");
  }
  if (!logits.allFinite()) throw Error(ErrorKind::DataError, "non-finite logits");
  const double peak = logits.maxCoeff();
  const Vector shifted = logits.array() - peak;
  const double log_total = std::log(shifted.array().exp().sum());
  const Vector log_softmax = shifted.array() - log_total;
  double value = 0.0;
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    if (target.weights()(k) != 0.0) value -= target.weights()(k) * log_softmax(k);
  }
  return {std::max(value, 0.0), log_softmax.array().exp().matrix() - target.weights()};
}

AdaptiveScaleState update_adaptive_scale(const AdaptiveScaleState& state,
                                         std::span<const double> batch_angles_true,
                                         std::span<const double> batch_logit_sums) {
  if (batch_angles_true.empty() || batch_logit_sums.empty()) {
    throw Error(ErrorKind::EmptyBatch, "scale update needs batch statistics");
  }
  if (state.frozen) return state;

  std::vector<double> angles(batch_angles_true.begin(), batch_angles_true.end());
  std::sort(angles.begin(), angles.end());
  const std::size_t mid = angles.size() / 2;
  const double median = angles.size() % 2 == 1 ? angles[mid] : 0.5 * (angles[mid - 1] + angles[mid]);

  double sum = 0.0;
  for (double v : batch_logit_sums) sum += v;
  const double mean_sum = sum / static_cast<double>(batch_logit_sums.size());

  const double updated = std::log(mean_sum) / std::cos(std::min(std::numbers::pi / 4.0, median));
  AdaptiveScaleState next = state;
  if (std::isfinite(updated) && updated > 0.0) next.s_hat = updated;
  return next;
}

Vector head_logits(const Vector& x, const CenterBank& bank, const AdaptiveScaleState& scale,
                   const HeadSettings& settings) {
  return softmax_logits(x, bank, scale, settings).logits;
}

LossOutput evaluate_loss(const Vector& x, const TargetDistribution& target, const CenterBank& bank,
                         const AdaptiveScaleState& scale, const HeadSettings& settings) {
  check_dims(x, bank);
  check_target(target, bank);
  if (settings.head == LossHead::Compactness) return weighted_compactness(x, target, bank);

  const LogitJacobian lj = softmax_logits(x, bank, scale, settings);
  const LossOutput cce = softmax_cce(lj.logits, target);
  LossOutput out{cce.value, lj.jacobian.transpose() * cce.gradient};
  if (settings.head == LossHead::CompactnessCce) {
    const LossOutput compact = weighted_compactness(x, target, bank);
    out.value = compact.value + settings.cce_weight * out.value;
    out.gradient = compact.gradient + settings.cce_weight * out.gradient;
  }
  return out;
}

Vector class_cosines(const Vector& x, const CenterBank& bank, const AdaptiveScaleState& scale) {
  switch (bank.kind()) {
    case CenterBank::Kind::Single:
      return cosine_logits(x, bank, 1.0).logits;
    case CenterBank::Kind::SubClusters:
      return subcluster_logits(x, bank, scale.s_hat).logits / scale.s_hat;
    case CenterBank::Kind::Subspace:
      return Vector::Ones(bank.num_classes()) - subspace_logits(x, bank, 1.0).logits / 2.0;
  }
  throw Error(ErrorKind::DataError, "unknown bank kind");
}

ScaleStatistics scale_statistics(const Vector& cosines, int true_class, double s_hat) {
  ScaleStatistics stats;
  stats.angle_true = std::acos(std::clamp(cosines(true_class), -1.0, 1.0));
  for (Eigen::Index k = 0; k < cosines.size(); ++k) {
    if (k != true_class) stats.logit_sum += std::exp(s_hat * cosines(k));
  }
  return stats;
}

}  // namespace adaproj
