#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "adaproj/geometry.hpp"

namespace adaproj {

/// The five training objectives that can drive the embedding model.
enum class LossHead {
  Compactness,       // one fixed center per class, ||P_S(x) - c_y||^2
  CompactnessCce,    // compactness plus softmax CCE over AdaCos logits
  AdaCos,            // s * cos to one fixed center per class
  SubclusterAdaCos,  // smoothed max over M fixed centers per class
  AdaProj,           // s * squared chord distance to a class subspace
};

std::string_view to_string(LossHead head);
/// Accepts the names printed by to_string. Throws ConfigInvalid otherwise.
LossHead parse_loss_head(std::string_view name);
inline constexpr LossHead kAllLossHeads[] = {LossHead::Compactness, LossHead::CompactnessCce,
                                             LossHead::AdaCos, LossHead::SubclusterAdaCos,
                                             LossHead::AdaProj};

enum class CenterInit {
  Orthonormal,  // Glorot draw followed by Gram-Schmidt
  RawGlorot,    // Glorot draw, rows scaled to unit norm only
};

/// Fixed class centers. Each class owns a matrix whose rows are its centers:
/// one row (single center), M rows (sub-clusters) or J rows (subspace basis).
/// There are no mutators; a bank is frozen from construction on.
class CenterBank {
 public:
  enum class Kind { Single, SubClusters, Subspace };

  static CenterBank single(int num_classes, Eigen::Index dim, std::uint64_t seed);
  static CenterBank subclusters(int num_classes, int per_class, Eigen::Index dim, std::uint64_t seed);
  static CenterBank subspaces(int num_classes, int subspace_dim, Eigen::Index dim, std::uint64_t seed,
                              CenterInit init = CenterInit::Orthonormal);
  /// Explicit centers, one matrix per class. Rows must be unit norm within
  /// 1e-6, a Single bank needs one row per class and a Subspace bank J < D rows.
  static CenterBank from_centers(Kind kind, std::vector<Matrix> centers);
  /// The bank a given loss head trains against.
  static CenterBank for_head(LossHead head, int num_classes, Eigen::Index dim, int subspace_dim,
                             int subclusters, std::uint64_t seed,
                             CenterInit init = CenterInit::Orthonormal);

  Kind kind() const noexcept { return kind_; }
  int num_classes() const noexcept { return static_cast<int>(centers_.size()); }
  Eigen::Index dim() const noexcept { return centers_.front().cols(); }
  const Matrix& centers(int class_index) const { return centers_.at(class_index); }

  /// FNV-1a over the raw bytes of every center.
  std::uint64_t fingerprint() const;

 private:
  CenterBank(Kind kind, std::vector<Matrix> centers) : kind_(kind), centers_(std::move(centers)) {}

  Kind kind_;
  std::vector<Matrix> centers_;
};

struct AdaptiveScaleState {
  double s_hat = 1.0;
  int num_classes = 0;
  bool frozen = false;

  /// s_0 = sqrt(2) * ln(max(N - 1, 2)).
  static AdaptiveScaleState initial(int num_classes, bool frozen = false);
};

/// Class weights summing to one.
class TargetDistribution {
 public:
  static TargetDistribution one_hot(int num_classes, int class_index);
  /// lambda on `first`, 1 - lambda on `second`.
  static TargetDistribution mixed(int num_classes, int first, int second, double lambda);
  static TargetDistribution from_weights(Vector weights);

  const Vector& weights() const noexcept { return weights_; }
  int num_classes() const noexcept { return static_cast<int>(weights_.size()); }
  /// Class carrying the largest weight (lowest index on ties).
  int dominant_class() const;

 private:
  explicit TargetDistribution(Vector weights) : weights_(std::move(weights)) {}
  Vector weights_;
};

struct LossOutput {
  double value = 0.0;
  Vector gradient;
};

// Logit operations. All of them accept unnormalized x and apply the sphere
// projection internally; ZeroVector is thrown for ||x|| <= kNormEpsilon.

/// s * ||P_S(x) - P_S(P_span(x))||^2 = s * 2 (1 - cos_k), a distance in [0, 2s].
Vector adaproj_logits(const Vector& x, const CenterBank& bank, const AdaptiveScaleState& scale);
/// s * <P_S(x), c_k>.
Vector adacos_logits(const Vector& x, const CenterBank& bank, const AdaptiveScaleState& scale);
/// log((1/M) sum_m exp(s * <P_S(x), c_km>)).
Vector subcluster_adacos_logits(const Vector& x, const CenterBank& bank, const AdaptiveScaleState& scale);

/// ||P_S(x) - c||^2 with its gradient in x.
LossOutput compactness_loss(const Vector& x, const EmbeddingVector& class_center);

/// -sum_k t_k log softmax(z)_k. The gradient is with respect to the logits.
LossOutput softmax_cce(const Vector& logits, const TargetDistribution& target);

/// AdaCos scale update: s' = ln(B_avg) / cos(min(pi/4, theta_med)).
/// `batch_angles_true` are angles to the true class, `batch_logit_sums` are
/// sum_{k != y} exp(s * cos_k) per sample. A frozen state is returned as is.
/// If the update would not be a positive finite number the old scale is kept.
AdaptiveScaleState update_adaptive_scale(const AdaptiveScaleState& state,
                                         std::span<const double> batch_angles_true,
                                         std::span<const double> batch_logit_sums);

/// Per-head knobs that do not live in the bank.
struct HeadSettings {
  LossHead head = LossHead::AdaProj;
  bool negate_distance = true;  // AdaProj: softmax consumes -distance
  double cce_weight = 1.0;      // CompactnessCce: weight of the CCE term
};

/// Logits that the softmax consumes for `settings.head`. For the compactness
/// head these are the AdaCos logits, used for prediction only.
Vector head_logits(const Vector& x, const CenterBank& bank, const AdaptiveScaleState& scale,
                   const HeadSettings& settings);

/// Full training loss of one sample, with the gradient in x.
LossOutput evaluate_loss(const Vector& x, const TargetDistribution& target, const CenterBank& bank,
                         const AdaptiveScaleState& scale, const HeadSettings& settings);

/// Per-class cosine similarities as seen by the scale update: plain cosine for
/// single centers, subspace cosine for AdaProj, and the smoothed maximum
/// (logit / s) for sub-clusters.
Vector class_cosines(const Vector& x, const CenterBank& bank, const AdaptiveScaleState& scale);

struct ScaleStatistics {
  double angle_true = 0.0;
  double logit_sum = 0.0;
};

/// Statistics of one sample for update_adaptive_scale.
ScaleStatistics scale_statistics(const Vector& cosines, int true_class, double s_hat);

}  // namespace adaproj
