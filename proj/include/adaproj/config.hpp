#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "adaproj/features.hpp"
#include "adaproj/loss_heads.hpp"
#include "adaproj/metrics.hpp"

namespace adaproj {

enum class AnomalyMode {
  Isotropic,     // Gaussian in the orthogonal complement of the section subspace
  CrossSection,  // Gaussian in the other sections' subspaces, minus the own subspace
};

/// Parameters of the planted-subspace synthetic benchmark.
struct SyntheticSpec {
  int sections = 6;              // one auxiliary class per section
  int latent_dim = 8;            // dimension of each section's planted subspace
  int spectrogram_dim = 64;      // feature dims of the two branches
  int spectrum_dim = 64;
  int train_source = 100;        // normal training clips per section, source domain
  int train_target = 10;         // normal training clips per section, target domain
  int test_per_domain = 25;      // test normals and anomalies per section and domain
  double latent_scale = 1.0;     // std of the latent coordinates
  double section_offset = 1.0;   // norm of each section's mean offset
  double noise = 0.1;            // per-coordinate isotropic noise std
  double perturbation = 0.5;     // per-coordinate std of the off-subspace anomaly component
  double domain_shift = 1.0;     // size of the target domain's in-subspace shift
  AnomalyMode anomaly_mode = AnomalyMode::CrossSection;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  LossHead loss_head = LossHead::AdaProj;
  int embedding_dim = 512;
  int subspace_dim = 32;
  int subclusters = 32;
  int kmeans_k = 32;
  int epochs = 10;
  int batch_size = 64;
  int trials = 10;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool mixup = true;
  bool frozen_scale = false;
  bool negate_distance = true;
  double cce_weight = 1.0;
  CenterInit center_init = CenterInit::Orthonormal;
  int hidden_units = 128;
  int hidden_layers = 2;
  FeatureParams features;
  double max_fpr = 0.1;
  PaucNormalization pauc_normalization = PaucNormalization::McClish;
  int threads = 1;
  std::string dataset = "synthetic";  // "synthetic" or "manifest"
  std::filesystem::path manifest;     // resolved against the config file's directory
  SyntheticSpec synthetic;
  std::vector<int> sweep_dims = {4, 8, 16, 32, 64};
};

/// Flat `key = value` lines, '#' starts a comment. Unknown keys, malformed
/// values and duplicate keys throw ConfigInvalid. The result is validated.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws ConfigInvalid / InvalidDims for inconsistent settings (e.g. J >= D).
void validate(const ExperimentConfig& config);

/// Writes every key in canonical order; parse_config reads it back.
std::string render_config(const ExperimentConfig& config);

}  // namespace adaproj
