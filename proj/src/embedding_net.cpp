#include "adaproj/embedding_net.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "adaproj/binary_io.hpp"
#include "adaproj/error.hpp"
#include "adaproj/random.hpp"

namespace adaproj {
namespace {

constexpr std::string_view kModelMagic = "ADPJ1";

struct BranchCache {
  Matrix input;                 // standardized input, in x B
  std::vector<Matrix> pre;      // pre-activations per layer
  std::vector<Matrix> post;     // outputs per layer
};

Matrix activate(const Matrix& z, Activation a) {
  if (a == Activation::Linear) return z;
  return z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
}

Matrix activation_derivative(const Matrix& z, Activation a) {
  if (a == Activation::Linear) return Matrix::Ones(z.rows(), z.cols());
  return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
}

Matrix branch_forward(const Branch& branch, const Matrix& raw, BranchCache* cache) {
  if (raw.rows() != branch.input_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "branch expects input dim " + std::to_string(branch.input_dim()) +
                                                  ", got " + std::to_string(raw.rows()));
  }
  Matrix x = (raw.colwise() - branch.input_mean).array().colwise() * branch.input_scale.array();
  if (cache) cache->input = x;
  for (const DenseLayer& layer : branch.layers) {
    Matrix z = (layer.weights * x).colwise() + layer.bias;
    x = activate(z, layer.activation);
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->post.push_back(x);
    }
  }
  return x;
}

void branch_backward(const Branch& branch, const BranchCache& cache, Matrix grad_out, Branch& grads) {
  for (std::size_t l = branch.layers.size(); l-- > 0;) {
    const DenseLayer& layer = branch.layers[l];
    const Matrix grad_pre = grad_out.cwiseProduct(activation_derivative(cache.pre[l], layer.activation));
    const Matrix& below = l == 0 ? cache.input : cache.post[l - 1];
    grads.layers[l].weights.noalias() += grad_pre * below.transpose();
    grads.layers[l].bias += grad_pre.rowwise().sum();
    if (l > 0) grad_out = layer.weights.transpose() * grad_pre;
  }
}

Matrix stack_columns(const std::vector<const BranchInputs*>& inputs, int branch) {
  const Eigen::Index rows = branch == kSpectrogramBranch ? inputs.front()->spectrogram.size()
                                                         : inputs.front()->spectrum.size();
  Matrix out(rows, static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Vector& v = branch == kSpectrogramBranch ? inputs[i]->spectrogram : inputs[i]->spectrum;
    if (v.size() != rows) throw Error(ErrorKind::DimensionMismatch, "inconsistent feature dims within a batch");
    out.col(static_cast<Eigen::Index>(i)) = v;
  }
  return out;
}

Matrix forward_concat(const ModelParams& params, const std::vector<const BranchInputs*>& inputs,
                      std::array<BranchCache, 2>* caches) {
  const Matrix top = branch_forward(params.branches[0], stack_columns(inputs, 0), caches ? &(*caches)[0] : nullptr);
  const Matrix bottom = branch_forward(params.branches[1], stack_columns(inputs, 1), caches ? &(*caches)[1] : nullptr);
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

Branch make_branch(Eigen::Index input_dim, Eigen::Index output_dim, const NetArchitecture& arch,
                   std::uint64_t seed) {
  Branch b;
  b.input_mean = Vector::Zero(input_dim);
  b.input_scale = Vector::Ones(input_dim);
  Eigen::Index fan_in = input_dim;
  for (int l = 0; l <= arch.hidden_layers; ++l) {
    const bool last = l == arch.hidden_layers;
    const Eigen::Index fan_out = last ? output_dim : arch.hidden_units;
    b.layers.push_back({glorot_uniform(fan_out, fan_in, derive_seed(seed, l)), Vector::Zero(fan_out),
                        last ? Activation::Linear : Activation::LeakyRelu});
    fan_in = fan_out;
  }
  return b;
}

// Per-dimension standardization from the training features.
void fit_standardization(Branch& branch, const std::vector<TrainingSample>& samples, int which) {
  const Eigen::Index dim = branch.input_dim();
  Vector mean = Vector::Zero(dim);
  Vector sq = Vector::Zero(dim);
  for (const TrainingSample& s : samples) {
    const Vector& v = which == kSpectrogramBranch ? s.features.spectrogram : s.features.spectrum;
    mean += v;
    sq += v.cwiseAbs2();
  }
  const double n = static_cast<double>(samples.size());
  mean /= n;
  const Vector var = (sq / n - mean.cwiseAbs2()).cwiseMax(0.0);
  branch.input_mean = mean;
  branch.input_scale = var.unaryExpr([](double v) { return v > 1e-24 ? 1.0 / std::sqrt(v) : 1.0; });
}

void validate(const TrainConfig& config, const TrainingSet& data, const CenterBank& bank) {
  if (config.epochs < 1) throw Error(ErrorKind::ConfigInvalid, "epochs must be >= 1");
  if (config.batch_size < 1) throw Error(ErrorKind::ConfigInvalid, "batch size must be >= 1");
  if (config.architecture.embedding_dim < 2 || config.architecture.embedding_dim % 2 != 0) {
    throw Error(ErrorKind::ConfigInvalid, "embedding dimension must be even and >= 2");
  }
  if (config.architecture.hidden_layers < 0 || config.architecture.hidden_units < 1) {
    throw Error(ErrorKind::ConfigInvalid, "invalid hidden layer configuration");
  }
  if (data.samples.empty()) throw Error(ErrorKind::EmptyDataset, "no training samples");
  if (data.num_classes != bank.num_classes()) {
    throw Error(ErrorKind::ConfigInvalid, "dataset has " + std::to_string(data.num_classes) +
                                              " classes, center bank has " + std::to_string(bank.num_classes()));
  }
  if (bank.dim() != config.architecture.embedding_dim) {
    throw Error(ErrorKind::ConfigInvalid, "center bank dimension differs from embedding dimension");
  }
  if (!data.waveforms.empty() && data.waveforms.size() != data.samples.size()) {
    throw Error(ErrorKind::DataError, "waveform list does not match sample list");
  }
  for (const TrainingSample& s : data.samples) {
    if (s.class_index < 0 || s.class_index >= data.num_classes) {
      throw Error(ErrorKind::DataError, "class index " + std::to_string(s.class_index) + " out of range");
    }
  }
}

}  // namespace

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (auto t : z.tensors()) t.setZero();
  for (Branch& b : z.branches) {
    b.input_mean.setZero();
    b.input_scale.setZero();
  }
  return z;
}

std::vector<Eigen::Map<Vector>> ModelParams::tensors() {
  std::vector<Eigen::Map<Vector>> out;
  for (Branch& b : branches) {
    for (DenseLayer& l : b.layers) {
      out.emplace_back(l.weights.data(), l.weights.size());
      out.emplace_back(l.bias.data(), l.bias.size());
    }
  }
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Branch& b : branches)
    for (const DenseLayer& l : b.layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

ModelParams init_model(Eigen::Index spectrogram_dim, Eigen::Index spectrum_dim, const NetArchitecture& arch,
                       std::uint64_t seed) {
  if (arch.embedding_dim < 2 || arch.embedding_dim % 2 != 0) {
    throw Error(ErrorKind::ConfigInvalid, "embedding dimension must be even and >= 2");
  }
  if (spectrogram_dim < 1 || spectrum_dim < 1) throw Error(ErrorKind::DimensionMismatch, "empty feature vector");
  ModelParams p;
  p.branches[0] = make_branch(spectrogram_dim, arch.embedding_dim / 2, arch, derive_seed(seed, 0));
  p.branches[1] = make_branch(spectrum_dim, arch.embedding_dim / 2, arch, derive_seed(seed, 1));
  return p;
}

Vector forward_raw(const ModelParams& params, const BranchInputs& inputs) {
  return forward_concat(params, {&inputs}, nullptr).col(0);
}

EmbeddingVector forward(const ModelParams& params, const BranchInputs& inputs) {
  return sphere_project(forward_raw(params, inputs));
}

Matrix embed_all(const ModelParams& params, const std::vector<BranchInputs>& inputs) {
  Matrix out(static_cast<Eigen::Index>(inputs.size()), params.embedding_dim());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < inputs.size(); start += kChunk) {
    std::vector<const BranchInputs*> chunk;
    for (std::size_t i = start; i < std::min(inputs.size(), start + kChunk); ++i) chunk.push_back(&inputs[i]);
    const Matrix raw = forward_concat(params, chunk, nullptr);
    for (Eigen::Index c = 0; c < raw.cols(); ++c) {
      out.row(static_cast<Eigen::Index>(start) + c) = sphere_project(raw.col(c)).values().transpose();
    }
  }
  return out;
}

GradientResult batch_gradients(const ModelParams& params, const std::vector<const BranchInputs*>& inputs,
                               const std::vector<TargetDistribution>& targets, const CenterBank& bank,
                               const AdaptiveScaleState& scale, const HeadSettings& settings) {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw Error(ErrorKind::EmptyBatch, "batch needs matching, nonempty inputs and targets");
  }
  std::array<BranchCache, 2> caches;
  const Matrix raw = forward_concat(params, inputs, &caches);
  const double inv_batch = 1.0 / static_cast<double>(inputs.size());

  GradientResult result{0.0, params.zeros_like()};
  Matrix grad_raw(raw.rows(), raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    const LossOutput out = evaluate_loss(raw.col(c), targets[static_cast<std::size_t>(c)], bank, scale, settings);
    result.loss += out.value * inv_batch;
    grad_raw.col(c) = out.gradient * inv_batch;
  }
  const Eigen::Index half = params.branches[0].output_dim();
  branch_backward(params.branches[0], caches[0], grad_raw.topRows(half), result.gradients.branches[0]);
  branch_backward(params.branches[1], caches[1], grad_raw.bottomRows(raw.rows() - half),
                  result.gradients.branches[1]);
  return result;
}

GradientResult backward(const ModelParams& params, const BranchInputs& inputs, const TargetDistribution& target,
                        const CenterBank& bank, const AdaptiveScaleState& scale, const HeadSettings& settings) {
  return batch_gradients(params, {&inputs}, {target}, bank, scale, settings);
}

AdamOptimizer::AdamOptimizer(const ModelParams& shape, AdamConfig config) : config_(config) {
  ModelParams copy = shape;
  for (const auto& t : copy.tensors()) {
    m_.push_back(Vector::Zero(t.size()));
    v_.push_back(Vector::Zero(t.size()));
  }
}

void AdamOptimizer::step(ModelParams& params, ModelParams& gradients) {
  auto p = params.tensors();
  auto g = gradients.tensors();
  if (p.size() != m_.size() || g.size() != m_.size()) {
    throw Error(ErrorKind::DimensionMismatch, "optimizer state does not match the model");
  }
  ++t_;
  const double correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g[i].cwiseAbs2();
    p[i].array() -= config_.step * (m_[i].array() / correction1) /
                    ((v_[i].array() / correction2).sqrt() + config_.epsilon);
  }
}

MixedSample mixup_pair(const TrainingSample& a, const TrainingSample& b, double lambda, int num_classes) {
  if (a.features.spectrogram.size() != b.features.spectrogram.size() ||
      a.features.spectrum.size() != b.features.spectrum.size()) {
    throw Error(ErrorKind::DimensionMismatch, "mixup needs samples of equal feature dims");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorKind::DataError, "mixing coefficient outside [0, 1]");
  return {{lambda * a.features.spectrogram + (1.0 - lambda) * b.features.spectrogram,
           lambda * a.features.spectrum + (1.0 - lambda) * b.features.spectrum},
          TargetDistribution::mixed(num_classes, a.class_index, b.class_index, lambda)};
}

Waveform mix_waveforms(const Waveform& a, const Waveform& b, double lambda) {
  if (a.sample_rate != b.sample_rate) throw Error(ErrorKind::DimensionMismatch, "sample rates differ");
  Waveform out;
  out.sample_rate = a.sample_rate;
  out.samples.assign(std::max(a.samples.size(), b.samples.size()), 0.0);
  for (std::size_t i = 0; i < a.samples.size(); ++i) out.samples[i] += lambda * a.samples[i];
  for (std::size_t i = 0; i < b.samples.size(); ++i) out.samples[i] += (1.0 - lambda) * b.samples[i];
  return out;
}

TrainResult train(const TrainConfig& config, const TrainingSet& data, const CenterBank& bank) {
  validate(config, data, bank);
  const TrainingSample& first = data.samples.front();
  TrainResult result;
  result.params = init_model(first.features.spectrogram.size(), first.features.spectrum.size(),
                             config.architecture, derive_seed(config.seed, 1));
  fit_standardization(result.params.branches[0], data.samples, kSpectrogramBranch);
  fit_standardization(result.params.branches[1], data.samples, kSpectrumBranch);

  AdaptiveScaleState scale = AdaptiveScaleState::initial(data.num_classes, config.frozen_scale);
  AdamOptimizer adam(result.params, config.adam);
  std::mt19937_64 rng(derive_seed(config.seed, 2));
  std::uniform_real_distribution<double> unit_interval(0.0, 1.0);

  const std::size_t n = data.samples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const bool uses_scale = config.head.head != LossHead::Compactness;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      const std::size_t count = end - start;

      std::vector<BranchInputs> mixed_features;
      std::vector<TargetDistribution> targets;
      std::vector<const BranchInputs*> inputs;
      mixed_features.reserve(count);
      if (config.mixup) {
        std::vector<std::size_t> partner(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
        std::shuffle(partner.begin(), partner.end(), rng);
        for (std::size_t i = 0; i < count; ++i) {
          const std::size_t ia = order[start + i];
          const std::size_t ib = partner[i];
          const double lambda = unit_interval(rng);
          MixedSample m = mixup_pair(data.samples[ia], data.samples[ib], lambda, data.num_classes);
          if (!data.waveforms.empty()) {
            m.features = extract_branch_inputs(mix_waveforms(data.waveforms[ia], data.waveforms[ib], lambda),
                                               data.feature_params);
          }
          mixed_features.push_back(std::move(m.features));
          targets.push_back(std::move(m.target));
        }
        for (const BranchInputs& f : mixed_features) inputs.push_back(&f);
      } else {
        for (std::size_t i = start; i < end; ++i) {
          inputs.push_back(&data.samples[order[i]].features);
          targets.push_back(TargetDistribution::one_hot(data.num_classes, data.samples[order[i]].class_index));
        }
      }

      if (uses_scale && !scale.frozen) {
        std::vector<double> angles;
        std::vector<double> sums;
        for (std::size_t i = 0; i < count; ++i) {
          const Vector raw = forward_raw(result.params, *inputs[i]);
          const ScaleStatistics st =
              scale_statistics(class_cosines(raw, bank, scale), targets[i].dominant_class(), scale.s_hat);
          angles.push_back(st.angle_true);
          sums.push_back(st.logit_sum);
        }
        scale = update_adaptive_scale(scale, angles, sums);
      }

      GradientResult g = batch_gradients(result.params, inputs, targets, bank, scale, config.head);
      epoch_total += g.loss * static_cast<double>(count);
      adam.step(result.params, g.gradients);
    }
    result.epoch_losses.push_back(epoch_total / static_cast<double>(n));
  }
  result.final_scale = scale;
  return result;
}

void save_model(std::ostream& out, const ModelParams& params) {
  binary::write_magic(out, kModelMagic);
  binary::write_u32(out, static_cast<std::uint32_t>(params.embedding_dim()));
  binary::write_u32(out, static_cast<std::uint32_t>(params.branches.size()));
  for (const Branch& b : params.branches) {
    binary::write_u32(out, static_cast<std::uint32_t>(b.input_dim()));
    binary::write_u32(out, static_cast<std::uint32_t>(b.layers.size()));
    for (const DenseLayer& l : b.layers) {
      binary::write_u32(out, static_cast<std::uint32_t>(l.weights.cols()));
      binary::write_u32(out, static_cast<std::uint32_t>(l.weights.rows()));
      binary::write_u8(out, static_cast<std::uint8_t>(l.activation));
    }
  }
  for (const Branch& b : params.branches) {
    binary::write_vector(out, b.input_mean);
    binary::write_vector(out, b.input_scale);
    for (const DenseLayer& l : b.layers) {
      binary::write_matrix(out, l.weights);
      binary::write_vector(out, l.bias);
    }
  }
}

ModelParams load_model(std::istream& in) {
  binary::read_magic(in, kModelMagic);
  const auto dim = binary::read_u32(in);
  if (binary::read_u32(in) != 2) throw Error(ErrorKind::DataError, "model must have exactly two branches");
  ModelParams p;
  for (Branch& b : p.branches) {
    const auto input_dim = binary::read_u32(in);
    const auto layers = binary::read_u32(in);
    if (layers == 0 || layers > 64) throw Error(ErrorKind::DataError, "implausible layer count");
    b.input_mean.resize(input_dim);
    b.input_scale.resize(input_dim);
    std::uint32_t expected_in = input_dim;
    for (std::uint32_t l = 0; l < layers; ++l) {
      const auto fan_in = binary::read_u32(in);
      const auto fan_out = binary::read_u32(in);
      const auto act = binary::read_u8(in);
      if (fan_in != expected_in || act > 1) throw Error(ErrorKind::DataError, "inconsistent layer spec");
      b.layers.push_back({Matrix(fan_out, fan_in), Vector(fan_out), static_cast<Activation>(act)});
      expected_in = fan_out;
    }
  }
  for (Branch& b : p.branches) {
    b.input_mean = binary::read_vector(in, b.input_mean.size());
    b.input_scale = binary::read_vector(in, b.input_scale.size());
    for (DenseLayer& l : b.layers) {
      l.weights = binary::read_matrix(in, l.weights.rows(), l.weights.cols());
      l.bias = binary::read_vector(in, l.bias.size());
    }
  }
  if (p.embedding_dim() != dim) throw Error(ErrorKind::DataError, "embedding dim does not match layer spec");
  return p;
}

void save_model(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::DataError, "cannot write " + path.string());
  save_model(out, params);
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::DataError, "cannot read " + path.string());
  return load_model(in);
}

}  // namespace adaproj
