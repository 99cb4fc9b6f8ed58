#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adaproj/config.hpp"
#include "adaproj/features.hpp"
#include "adaproj/types.hpp"

namespace adaproj {

/// One manifest row together with its extracted features.
struct Clip {
  std::string id;
  std::string path;  // as written in the manifest (relative to it, or absolute)
  std::string machine_type;
  std::string section;
  Domain domain = Domain::Source;
  Split split = Split::Train;
  Label label = Label::Normal;
  std::string attributes;
  BranchInputs features;
  std::optional<Waveform> waveform;  // only for audio rows

  /// Evaluation unit: "<machine_type>_<section>".
  std::string section_key() const;
  /// Auxiliary classification label: machine type, section and attributes.
  std::string class_key() const;
};

struct Dataset {
  std::vector<Clip> clips;
};

/// Planted-subspace benchmark. Each section owns a random orthonormal basis
/// of `latent_dim` directions in feature space and a mean offset. Normal clips
/// are offset + basis * z + noise with z ~ N(0, latent_scale^2 I); target-domain
/// clips are additionally shifted inside the subspace by `domain_shift`.
/// Anomalies add a Gaussian component scaled by `perturbation` and projected
/// onto the orthogonal complement of the section subspace. In cross-section
/// mode it is drawn from the other sections' subspaces, otherwise isotropic.
/// Deterministic in spec.seed.
Dataset generate_synthetic(const SyntheticSpec& spec);

// Feature blob: "ADPJ-FT1" | u32 spectrogram_dim | u32 spectrum_dim | f64 payload.
void save_feature_blob(const std::filesystem::path& path, const BranchInputs& features);
BranchInputs load_feature_blob(const std::filesystem::path& path);

inline constexpr const char* kManifestHeader = "id,path,machine_type,section,domain,split,label,attributes";

/// Writes manifest.csv and every clip's feature blob (at clip.path) under `dir`.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Reads a manifest. `.wav` paths are decoded and run through the feature
/// extractor; anything else is read as a feature blob. Relative paths resolve
/// against the manifest's directory. Throws DataError, e.g. for train rows
/// that are not labelled normal.
Dataset load_manifest(const std::filesystem::path& manifest, const FeatureParams& params);

/// Synthetic or manifest dataset, as selected by the config.
Dataset load_dataset(const ExperimentConfig& config);

}  // namespace adaproj
