#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "adaproj/features.hpp"
#include "adaproj/geometry.hpp"
#include "adaproj/loss_heads.hpp"
#include "adaproj/types.hpp"

namespace adaproj {

enum class Activation : std::uint8_t { Linear = 0, LeakyRelu = 1 };

inline constexpr double kLeakySlope = 0.01;

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::Linear;
};

/// One feature branch: fixed input standardization followed by dense layers.
struct Branch {
  Vector input_mean;
  Vector input_scale;
  std::vector<DenseLayer> layers;

  Eigen::Index input_dim() const { return input_mean.size(); }
  Eigen::Index output_dim() const { return layers.back().weights.rows(); }
};

inline constexpr int kSpectrogramBranch = 0;
inline constexpr int kSpectrumBranch = 1;

/// Two branches whose outputs are concatenated and projected onto the sphere.
struct ModelParams {
  std::array<Branch, 2> branches;

  Eigen::Index embedding_dim() const { return branches[0].output_dim() + branches[1].output_dim(); }
  /// Same shapes, all parameters zero (used as gradient accumulator).
  ModelParams zeros_like() const;
  /// Mutable views over every weight matrix and bias vector, in file order.
  std::vector<Eigen::Map<Vector>> tensors();
  std::size_t parameter_count() const;
};

struct NetArchitecture {
  Eigen::Index embedding_dim = 512;
  int hidden_units = 128;
  int hidden_layers = 2;
};

/// Glorot-uniform weights, zero biases, identity input standardization.
ModelParams init_model(Eigen::Index spectrogram_dim, Eigen::Index spectrum_dim, const NetArchitecture& arch,
                       std::uint64_t seed);

/// Concatenated branch outputs before normalization.
Vector forward_raw(const ModelParams& params, const BranchInputs& inputs);

/// Unit-norm embedding. Throws DimensionMismatch or ZeroVector.
EmbeddingVector forward(const ModelParams& params, const BranchInputs& inputs);

/// Embeddings of many clips, one unit row each.
Matrix embed_all(const ModelParams& params, const std::vector<BranchInputs>& inputs);

struct GradientResult {
  double loss = 0.0;          // mean over the batch
  ModelParams gradients;      // gradient of the mean loss
};

/// Loss and parameter gradients for a batch under the given head.
GradientResult batch_gradients(const ModelParams& params, const std::vector<const BranchInputs*>& inputs,
                               const std::vector<TargetDistribution>& targets, const CenterBank& bank,
                               const AdaptiveScaleState& scale, const HeadSettings& settings);

/// Single-sample convenience wrapper around batch_gradients.
GradientResult backward(const ModelParams& params, const BranchInputs& inputs, const TargetDistribution& target,
                        const CenterBank& bank, const AdaptiveScaleState& scale, const HeadSettings& settings);

struct AdamConfig {
  double step = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const ModelParams& shape, AdamConfig config);
  void step(ModelParams& params, ModelParams& gradients);
  long steps_taken() const noexcept { return t_; }

 private:
  AdamConfig config_;
  std::vector<Vector> m_;
  std::vector<Vector> v_;
  long t_ = 0;
};

struct TrainingSample {
  BranchInputs features;
  int class_index = 0;
  Domain domain = Domain::Source;
  std::string section;
};

/// Convex combination of two samples plus the matching label distribution:
/// features lambda * a + (1 - lambda) * b, weight lambda on class(a).
struct MixedSample {
  BranchInputs features;
  TargetDistribution target;
};
MixedSample mixup_pair(const TrainingSample& a, const TrainingSample& b, double lambda, int num_classes);

/// lambda * a + (1 - lambda) * b; the shorter clip is zero padded.
Waveform mix_waveforms(const Waveform& a, const Waveform& b, double lambda);

struct TrainConfig {
  int epochs = 10;
  int batch_size = 64;
  AdamConfig adam;
  bool mixup = true;
  bool frozen_scale = false;
  std::uint64_t seed = 0;
  HeadSettings head;
  NetArchitecture architecture;
};

struct TrainingSet {
  std::vector<TrainingSample> samples;
  int num_classes = 0;
  // When non-empty (same order as samples) mixup is applied to these
  // waveforms and features are re-extracted with `feature_params`.
  std::vector<Waveform> waveforms;
  FeatureParams feature_params;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_losses;  // mean training loss per epoch
  AdaptiveScaleState final_scale;
};

/// Adam training against a frozen center bank. Deterministic in config.seed.
/// Throws EmptyDataset or ConfigInvalid.
TrainResult train(const TrainConfig& config, const TrainingSet& data, const CenterBank& bank);

// "ADPJ1" | u32 D | u32 branches | per branch: u32 input_dim, u32 layers,
// per layer (u32 in, u32 out, u8 activation) | f64 payload: per branch
// input_mean, input_scale, then per layer weights (row-major) and bias.
void save_model(std::ostream& out, const ModelParams& params);
ModelParams load_model(std::istream& in);
void save_model(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace adaproj
