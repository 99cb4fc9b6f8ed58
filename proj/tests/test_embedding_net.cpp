#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "adaproj/embedding_net.hpp"
#include "test_support.hpp"

using namespace adaproj;
using adaproj::testing::gaussian_vector;
using adaproj::testing::relative_error;
using adaproj::testing::thrown_kind;

namespace {

BranchInputs random_inputs(Eigen::Index a, Eigen::Index b, std::mt19937_64& rng) {
  return {gaussian_vector(a, rng), gaussian_vector(b, rng)};
}

NetArchitecture small_arch(Eigen::Index dim = 8, int hidden_units = 6, int hidden_layers = 1) {
  return {dim, hidden_units, hidden_layers};
}

// Single linear layer per branch with identity standardization.
ModelParams linear_model(const Matrix& w0, const Vector& b0, const Matrix& w1, const Vector& b1) {
  ModelParams p;
  const Matrix* weights[2] = {&w0, &w1};
  const Vector* biases[2] = {&b0, &b1};
  for (int i = 0; i < 2; ++i) {
    Branch& br = p.branches[i];
    br.input_mean = Vector::Zero(weights[i]->cols());
    br.input_scale = Vector::Ones(weights[i]->cols());
    br.layers.push_back({*weights[i], *biases[i], Activation::Linear});
  }
  return p;
}

double total_loss(const ModelParams& p, const std::vector<BranchInputs>& xs, const std::vector<TargetDistribution>& ts,
                  const CenterBank& bank, const AdaptiveScaleState& s, const HeadSettings& h) {
  std::vector<const BranchInputs*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  return batch_gradients(p, ptrs, ts, bank, s, h).loss;
}

// Finite differences over every parameter, flattened in tensors() order.
Vector numeric_param_gradient(ModelParams p, const std::vector<BranchInputs>& xs,
                              const std::vector<TargetDistribution>& ts, const CenterBank& bank,
                              const AdaptiveScaleState& s, const HeadSettings& h, double step = 1e-5) {
  std::vector<double> out;
  auto tensors = p.tensors();
  for (auto& t : tensors) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double keep = t(i);
      t(i) = keep + step;
      const double up = total_loss(p, xs, ts, bank, s, h);
      t(i) = keep - step;
      const double down = total_loss(p, xs, ts, bank, s, h);
      t(i) = keep;
      out.push_back((up - down) / (2.0 * step));
    }
  }
  return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

Vector flatten(ModelParams p) {
  std::vector<double> out;
  for (const auto& t : p.tensors()) out.insert(out.end(), t.data(), t.data() + t.size());
  return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

TrainingSet separable_set(int classes, int per_class, std::uint64_t seed, Eigen::Index dim = 8) {
  std::mt19937_64 rng(seed);
  TrainingSet set;
  set.num_classes = classes;
  std::vector<Vector> means_a;
  std::vector<Vector> means_b;
  for (int k = 0; k < classes; ++k) {
    means_a.push_back(3.0 * gaussian_vector(dim, rng));
    means_b.push_back(3.0 * gaussian_vector(dim, rng));
  }
  for (int i = 0; i < per_class; ++i) {
    for (int k = 0; k < classes; ++k) {
      TrainingSample s;
      s.features.spectrogram = means_a[k] + 0.1 * gaussian_vector(dim, rng);
      s.features.spectrum = means_b[k] + 0.1 * gaussian_vector(dim, rng);
      s.class_index = k;
      set.samples.push_back(std::move(s));
    }
  }
  return set;
}

TrainConfig small_config(LossHead head, bool mixup) {
  TrainConfig c;
  c.epochs = 10;
  c.batch_size = 16;
  c.mixup = mixup;
  c.seed = 5;
  c.head.head = head;
  c.architecture = {16, 32, 2};
  return c;
}

// Mean CCE of the softmax head over the (unmixed) training set.
double training_cross_entropy(const TrainResult& r, const TrainingSet& set, const CenterBank& bank,
                              const HeadSettings& h) {
  double total = 0.0;
  for (const TrainingSample& s : set.samples) {
    const Vector raw = forward_raw(r.params, s.features);
    total += softmax_cce(head_logits(raw, bank, r.final_scale, h),
                         TargetDistribution::one_hot(set.num_classes, s.class_index))
                 .value;
  }
  return total / static_cast<double>(set.samples.size());
}

}  // namespace

TEST_SUITE("embedding_net") {

TEST_CASE("forward emits unit embeddings") {
  std::mt19937_64 rng(41);
  const ModelParams p = init_model(10, 7, small_arch(), 3);
  CHECK(p.embedding_dim() == 8);
  for (int draw = 0; draw < 50; ++draw) {
    CHECK(forward(p, random_inputs(10, 7, rng)).values().norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(thrown_kind([&] { forward(p, random_inputs(9, 7, rng)); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("zero network surfaces ZeroVector") {
  ModelParams p = init_model(4, 4, small_arch(), 1);
  for (auto& t : p.tensors()) t.setZero();
  for (auto& br : p.branches) br.input_scale.setOnes();
  std::mt19937_64 rng(42);
  CHECK(thrown_kind([&] { forward(p, random_inputs(4, 4, rng)); }) == ErrorKind::ZeroVector);
}

TEST_CASE("forward is deterministic for a fixed seed") {
  std::mt19937_64 rng(43);
  const BranchInputs x = random_inputs(12, 5, rng);
  const ModelParams a = init_model(12, 5, small_arch(), 9);
  const ModelParams b = init_model(12, 5, small_arch(), 9);
  CHECK(forward(a, x).values() == forward(b, x).values());
  CHECK(forward(a, x).values() != forward(init_model(12, 5, small_arch(), 10), x).values());
}

TEST_CASE("embed_all matches forward row by row") {
  std::mt19937_64 rng(44);
  const ModelParams p = init_model(6, 6, small_arch(), 4);
  std::vector<BranchInputs> xs;
  for (int i = 0; i < 300; ++i) xs.push_back(random_inputs(6, 6, rng));
  const Matrix e = embed_all(p, xs);
  for (int i = 0; i < 300; i += 37) {
    CHECK((e.row(i).transpose() - forward(p, xs[i]).values()).norm() < 1e-14);
  }
}

TEST_CASE("default architecture shapes") {
  const ModelParams p = init_model(64, 4096, NetArchitecture{}, 0);
  CHECK(p.embedding_dim() == 512);
  CHECK(p.branches[0].layers.size() == 3);
  CHECK(p.branches[0].layers[0].weights.rows() == 128);
  CHECK(p.branches[1].layers[0].weights.cols() == 4096);
  CHECK(p.branches[1].output_dim() == 256);
  CHECK(p.branches[0].layers[0].activation == Activation::LeakyRelu);
  CHECK(p.branches[0].layers[2].activation == Activation::Linear);
  CHECK(thrown_kind([] { init_model(4, 4, NetArchitecture{7, 4, 1}, 0); }) == ErrorKind::ConfigInvalid);
}

TEST_CASE("linear branch with compactness loss matches the closed-form gradient") {
  std::mt19937_64 rng(45);
  for (int draw = 0; draw < 20; ++draw) {
    const Matrix w0 = gaussian_vector(15, rng).reshaped(3, 5);
    const Matrix w1 = gaussian_vector(12, rng).reshaped(3, 4);
    const Vector b0 = gaussian_vector(3, rng);
    const Vector b1 = gaussian_vector(3, rng);
    const ModelParams p = linear_model(w0, b0, w1, b1);
    const BranchInputs x = random_inputs(5, 4, rng);
    const CenterBank bank = CenterBank::single(2, 6, 100 + draw);
    const int cls = draw % 2;
    const Vector c = bank.centers(cls).row(0).transpose();

    Vector y(6);
    y << w0 * x.spectrogram + b0, w1 * x.spectrum + b1;
    const double norm = y.norm();
    const Vector u = y / norm;
    const Vector dy = -2.0 * (c - u.dot(c) * u) / norm;

    const GradientResult g = backward(p, x, TargetDistribution::one_hot(2, cls), bank,
                                      AdaptiveScaleState::initial(2), {LossHead::Compactness, true, 1.0});
    CHECK(g.loss == doctest::Approx((u - c).squaredNorm()).epsilon(1e-14));
    const Matrix dw0 = dy.head(3) * x.spectrogram.transpose();
    const Matrix dw1 = dy.tail(3) * x.spectrum.transpose();
    CHECK((g.gradients.branches[0].layers[0].weights - dw0).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((g.gradients.branches[0].layers[0].bias - dy.head(3)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((g.gradients.branches[1].layers[0].weights - dw1).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((g.gradients.branches[1].layers[0].bias - dy.tail(3)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("gradient vanishes at the exact compactness minimum") {
  const CenterBank bank = CenterBank::single(3, 4, 8);
  const Vector c = bank.centers(1).row(0).transpose();
  const ModelParams p = linear_model(Matrix::Zero(2, 3), 2.0 * c.head(2), Matrix::Zero(2, 3), 2.0 * c.tail(2));
  std::mt19937_64 rng(46);
  const GradientResult g = backward(p, random_inputs(3, 3, rng), TargetDistribution::one_hot(3, 1), bank,
                                    AdaptiveScaleState::initial(3), {LossHead::Compactness, true, 1.0});
  CHECK(g.loss < 1e-28);
  CHECK(flatten(g.gradients).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("parameter gradients match finite differences on small networks") {
  std::mt19937_64 rng(47);
  for (LossHead head : kAllLossHeads) {
    CAPTURE(to_string(head));
    const int instances = head == LossHead::AdaProj ? 20 : 5;
    for (int draw = 0; draw < instances; ++draw) {
      const ModelParams p = init_model(5, 4, small_arch(8, 6, 1), 200 + draw);
      const CenterBank bank = CenterBank::for_head(head, 3, 8, 3, 2, 300 + draw);
      const AdaptiveScaleState s{2.0 + draw % 3, 3, false};
      std::vector<BranchInputs> xs;
      std::vector<TargetDistribution> ts;
      for (int i = 0; i < 3; ++i) {
        xs.push_back(random_inputs(5, 4, rng));
        ts.push_back(TargetDistribution::mixed(3, i, (i + 1) % 3, 0.3 + 0.2 * i));
      }
      const HeadSettings h{head, true, 1.0};
      std::vector<const BranchInputs*> ptrs;
      for (const auto& x : xs) ptrs.push_back(&x);
      const Vector analytic = flatten(batch_gradients(p, ptrs, ts, bank, s, h).gradients);
      const Vector numeric = numeric_param_gradient(p, xs, ts, bank, s, h);
      CHECK(relative_error(analytic, numeric) < 1e-4);
    }
  }
}

TEST_CASE("Adam with zero gradient leaves parameters unchanged") {
  ModelParams p = init_model(6, 6, small_arch(), 12);
  const Vector before = flatten(p);
  AdamOptimizer adam(p, AdamConfig{});
  ModelParams zero = p.zeros_like();
  for (int i = 0; i < 5; ++i) adam.step(p, zero);
  CHECK(flatten(p) == before);
  CHECK(adam.steps_taken() == 5);
}

TEST_CASE("first Adam step moves each parameter by about the step size against the gradient") {
  ModelParams p = init_model(3, 3, small_arch(4, 3, 1), 13);
  const Vector before = flatten(p);
  ModelParams g = p.zeros_like();
  for (auto& t : g.tensors()) t.setConstant(-0.37);
  AdamOptimizer adam(p, AdamConfig{});
  adam.step(p, g);
  const Vector delta = flatten(p) - before;
  CHECK((delta.array() - 1e-3).abs().maxCoeff() < 1e-10);
}

TEST_CASE("mixup_pair examples") {
  std::mt19937_64 rng(48);
  TrainingSample a{random_inputs(4, 3, rng), 2, Domain::Source, "s"};
  TrainingSample b{random_inputs(4, 3, rng), 5, Domain::Target, "s"};
  const MixedSample one = mixup_pair(a, b, 1.0, 7);
  CHECK(one.features.spectrogram == a.features.spectrogram);
  CHECK(one.target.weights() == TargetDistribution::one_hot(7, 2).weights());
  const MixedSample zero = mixup_pair(a, b, 0.0, 7);
  CHECK(zero.features.spectrum == b.features.spectrum);
  CHECK(zero.target.weights() == TargetDistribution::one_hot(7, 5).weights());
  const MixedSample half = mixup_pair(a, b, 0.5, 7);
  CHECK(half.target.weights()(2) == 0.5);
  CHECK(half.target.weights()(5) == 0.5);
  CHECK((half.features.spectrogram - 0.5 * (a.features.spectrogram + b.features.spectrogram)).norm() < 1e-15);
  b.features.spectrum = Vector::Zero(4);
  CHECK(thrown_kind([&] { mixup_pair(a, b, 0.5, 7); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("mix_waveforms zero pads the shorter clip") {
  const Waveform a{{1.0, 1.0, 1.0}, 16000.0};
  const Waveform b{{2.0}, 16000.0};
  const Waveform m = mix_waveforms(a, b, 0.25);
  REQUIRE(m.samples.size() == 3);
  CHECK(m.samples[0] == doctest::Approx(1.75));
  CHECK(m.samples[1] == doctest::Approx(0.25));
  CHECK(thrown_kind([&] { mix_waveforms(a, Waveform{{1.0}, 8000.0}, 0.5); }) == ErrorKind::DimensionMismatch);
}

TEST_CASE("train rejects invalid configurations") {
  const TrainingSet set = separable_set(3, 4, 1);
  const CenterBank bank = CenterBank::subspaces(3, 2, 16, 1);
  TrainConfig c = small_config(LossHead::AdaProj, true);
  c.epochs = 0;
  CHECK(thrown_kind([&] { train(c, set, bank); }) == ErrorKind::ConfigInvalid);
  c = small_config(LossHead::AdaProj, true);
  c.batch_size = 0;
  CHECK(thrown_kind([&] { train(c, set, bank); }) == ErrorKind::ConfigInvalid);
  c = small_config(LossHead::AdaProj, true);
  TrainingSet empty;
  empty.num_classes = 3;
  CHECK(thrown_kind([&] { train(c, empty, bank); }) == ErrorKind::EmptyDataset);
  CHECK(thrown_kind([&] { train(c, set, CenterBank::subspaces(4, 2, 16, 1)); }) == ErrorKind::ConfigInvalid);
}

TEST_CASE("training decreases the loss, is deterministic and leaves the bank untouched") {
  const TrainingSet set = separable_set(3, 40, 2);
  for (LossHead head : kAllLossHeads) {
    CAPTURE(to_string(head));
    const CenterBank bank = CenterBank::for_head(head, 3, 16, 4, 4, 17);
    const std::uint64_t before = bank.fingerprint();
    const TrainConfig c = small_config(head, true);
    const TrainResult r = train(c, set, bank);
    REQUIRE(r.epoch_losses.size() == 10);
    CHECK(r.epoch_losses.back() < r.epoch_losses.front());
    CHECK(bank.fingerprint() == before);
    CHECK(r.final_scale.s_hat > 0.0);
    const TrainResult again = train(c, set, bank);
    CHECK(again.epoch_losses == r.epoch_losses);
    CHECK(flatten(again.params) == flatten(r.params));
    for (const TrainingSample& s : set.samples) {
      CHECK(forward(r.params, s.features).values().norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("without mixup a 20-class separable set is fit to cross-entropy below ln(N)/4") {
  const int classes = 20;
  const TrainingSet set = separable_set(classes, 50, 3);
  for (LossHead head : {LossHead::AdaCos, LossHead::SubclusterAdaCos, LossHead::AdaProj}) {
    CAPTURE(to_string(head));
    const CenterBank bank = CenterBank::for_head(head, classes, 16, 4, 4, 18);
    const TrainConfig c = small_config(head, false);
    const TrainResult r = train(c, set, bank);
    CHECK(training_cross_entropy(r, set, bank, c.head) < std::log(static_cast<double>(classes)) / 4.0);
  }
}

TEST_CASE("frozen scale stays at its initial value") {
  const TrainingSet set = separable_set(4, 10, 4);
  const CenterBank bank = CenterBank::single(4, 16, 3);
  TrainConfig c = small_config(LossHead::AdaCos, true);
  c.frozen_scale = true;
  CHECK(train(c, set, bank).final_scale.s_hat == AdaptiveScaleState::initial(4).s_hat);
  c.frozen_scale = false;
  CHECK(train(c, set, bank).final_scale.s_hat != AdaptiveScaleState::initial(4).s_hat);
}

TEST_CASE("model files round trip bit for bit") {
  ModelParams p = init_model(7, 9, small_arch(), 21);
  p.branches[0].input_mean.setLinSpaced(-1.0, 1.0);
  std::stringstream buffer;
  save_model(buffer, p);
  CHECK(buffer.str().rfind("ADPJ1", 0) == 0);
  const ModelParams q = load_model(buffer);
  CHECK(flatten(q) == flatten(p));
  CHECK(q.branches[0].input_mean == p.branches[0].input_mean);
  CHECK(q.branches[1].input_scale == p.branches[1].input_scale);
  CHECK(q.branches[1].layers.back().activation == Activation::Linear);

  std::stringstream bad("NOTAMODEL");
  CHECK(thrown_kind([&] { load_model(bad); }) == ErrorKind::DataError);
  std::string truncated = buffer.str();
  truncated.resize(truncated.size() / 2);
  std::stringstream half(truncated);
  CHECK(thrown_kind([&] { load_model(half); }) == ErrorKind::DataError);
}

}  // TEST_SUITE
