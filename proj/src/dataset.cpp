#include "adaproj/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <random>

#include "adaproj/binary_io.hpp"
#include "adaproj/csv.hpp"
#include "adaproj/error.hpp"
#include "adaproj/random.hpp"

namespace adaproj {
namespace {

constexpr std::string_view kBlobMagic = "ADPJ-FT1";

Vector gaussian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Vector unit_gaussian(Eigen::Index n, std::mt19937_64& rng) {
  Vector v = gaussian(n, rng);
  return v / v.norm();
}

std::string padded(int value, int width) {
  std::string s = std::to_string(value);
  return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

BranchInputs split_features(const Vector& f, int spectrogram_dim) {
  return {f.head(spectrogram_dim), f.tail(f.size() - spectrogram_dim)};
}

}  // namespace

std::string Clip::section_key() const {
  return machine_type.empty() ? section : machine_type + "_" + section;
}

std::string Clip::class_key() const {
  std::string key = machine_type + "/" + section;
  if (!attributes.empty()) key += "/" + attributes;
  return key;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  const int dim = spec.spectrogram_dim + spec.spectrum_dim;
  if (spec.sections < 1 || spec.latent_dim < 1 || spec.latent_dim >= dim || spec.train_source < 1 ||
      spec.train_target < 0 || spec.test_per_domain < 1 || !(spec.noise >= 0.0) || !(spec.perturbation >= 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "invalid synthetic dataset parameters");
  }
  std::vector<Matrix> bases;
  for (int s = 0; s < spec.sections; ++s) {
    bases.push_back(random_basis(spec.latent_dim, dim, derive_seed(spec.seed, 1000 + s)).rows().transpose());
  }
  const bool cross_section = spec.anomaly_mode == AnomalyMode::CrossSection && spec.sections > 1;

  Dataset data;
  for (int s = 0; s < spec.sections; ++s) {
    std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(s)));
    const Matrix& basis = bases[s];
    const Vector offset = spec.section_offset * unit_gaussian(dim, rng);
    const Vector target_shift = spec.domain_shift * (basis * unit_gaussian(spec.latent_dim, rng));
    const std::string section = "section_" + padded(s, 2);

    auto draw = [&](Domain domain, bool anomalous) {
      Vector f = offset + spec.latent_scale * (basis * gaussian(spec.latent_dim, rng)) +
                 spec.noise * gaussian(dim, rng);
      if (domain == Domain::Target) f += target_shift;
      if (anomalous) {
        Vector g = Vector::Zero(dim);
        if (cross_section) {
          for (int other = 0; other < spec.sections; ++other) {
            if (other != s) g += bases[other] * gaussian(spec.latent_dim, rng);
          }
        } else {
          g = gaussian(dim, rng);
        }
        f += spec.perturbation * (g - basis * (basis.transpose() * g));
      }
      return f;
    };
    auto add = [&](Split split, Domain domain, Label label, int index) {
      Clip c;
      c.machine_type = "toy";
      c.section = section;
      c.domain = domain;
      c.split = split;
      c.label = label;
      c.id = c.section_key() + "_" + std::string(to_string(split)) + "_" + std::string(to_string(domain)) + "_" +
             std::string(to_string(label)) + "_" + padded(index, 4);
      c.path = "blobs/" + c.id + ".ftr";
      c.features = split_features(draw(domain, label == Label::Anomalous), spec.spectrogram_dim);
      data.clips.push_back(std::move(c));
    };

    for (int i = 0; i < spec.train_source; ++i) add(Split::Train, Domain::Source, Label::Normal, i);
    for (int i = 0; i < spec.train_target; ++i) add(Split::Train, Domain::Target, Label::Normal, i);
    for (Domain domain : {Domain::Source, Domain::Target}) {
      for (int i = 0; i < spec.test_per_domain; ++i) add(Split::Test, domain, Label::Normal, i);
      for (int i = 0; i < spec.test_per_domain; ++i) add(Split::Test, domain, Label::Anomalous, i);
    }
  }
  return data;
}

void save_feature_blob(const std::filesystem::path& path, const BranchInputs& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::DataError, "cannot write " + path.string());
  binary::write_magic(out, kBlobMagic);
  binary::write_u32(out, static_cast<std::uint32_t>(features.spectrogram.size()));
  binary::write_u32(out, static_cast<std::uint32_t>(features.spectrum.size()));
  binary::write_vector(out, features.spectrogram);
  binary::write_vector(out, features.spectrum);
}

BranchInputs load_feature_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::DataError, "cannot read " + path.string());
  binary::read_magic(in, kBlobMagic);
  const auto spectrogram_dim = binary::read_u32(in);
  const auto spectrum_dim = binary::read_u32(in);
  BranchInputs f;
  f.spectrogram = binary::read_vector(in, spectrogram_dim);
  f.spectrum = binary::read_vector(in, spectrum_dim);
  return f;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw Error(ErrorKind::DataError, "cannot write manifest in " + dir.string());
  manifest << kManifestHeader << '\n';
  for (const Clip& c : dataset.clips) {
    const std::filesystem::path blob = dir / c.path;
    std::filesystem::create_directories(blob.parent_path());
    save_feature_blob(blob, c.features);
    manifest << csv::join({c.id, c.path, c.machine_type, c.section, std::string(to_string(c.domain)),
                           std::string(to_string(c.split)), std::string(to_string(c.label)), c.attributes})
             << '\n';
  }
}

Dataset load_manifest(const std::filesystem::path& manifest, const FeatureParams& params) {
  const csv::Table table = csv::read(manifest);
  const std::size_t col_id = table.column("id"), col_path = table.column("path"),
                    col_machine = table.column("machine_type"), col_section = table.column("section"),
                    col_domain = table.column("domain"), col_split = table.column("split"),
                    col_label = table.column("label"), col_attr = table.column("attributes");
  const std::filesystem::path base = manifest.parent_path();
  Dataset data;
  for (const auto& row : table.rows) {
    Clip c;
    c.id = row[col_id];
    c.path = row[col_path];
    c.machine_type = row[col_machine];
    c.section = row[col_section];
    c.domain = parse_domain(row[col_domain]);
    c.split = parse_split(row[col_split]);
    c.label = parse_label(row[col_label]);
    c.attributes = row[col_attr];
    if (c.split == Split::Train && c.label != Label::Normal) {
      throw Error(ErrorKind::DataError, "training clip '" + c.id + "' is not labelled normal");
    }
    std::filesystem::path p(c.path);
    if (p.is_relative()) p = base / p;
    if (p.extension() == ".wav" || p.extension() == ".WAV") {
      c.waveform = read_wav(p);
      c.features = extract_branch_inputs(*c.waveform, params);
    } else {
      c.features = load_feature_blob(p);
    }
    data.clips.push_back(std::move(c));
  }
  if (data.clips.empty()) throw Error(ErrorKind::EmptyDataset, "manifest has no rows");
  return data;
}

Dataset load_dataset(const ExperimentConfig& config) {
  if (config.dataset == "manifest") return load_manifest(config.manifest, config.features);
  return generate_synthetic(config.synthetic);
}

}  // namespace adaproj
