#include "adaproj/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "adaproj/csv.hpp"
#include "adaproj/error.hpp"

namespace adaproj {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

Error bad_value(std::string_view key, std::string_view value) {
  return Error(ErrorKind::ConfigInvalid, "invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) throw bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw bad_value(key, value);
}

std::vector<int> parse_int_list(std::string_view key, std::string_view value) {
  std::vector<int> out;
  while (!value.empty()) {
    const auto comma = value.find(',');
    out.push_back(parse_number<int>(key, trim(value.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    value.remove_prefix(comma + 1);
  }
  if (out.empty()) throw bad_value(key, value);
  return out;
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, std::string_view, const std::filesystem::path&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field number_field(const char* key, T ExperimentConfig::*member) {
  return {key, [key, member](ExperimentConfig& c, std::string_view v, const auto&) { c.*member = parse_number<T>(key, v); },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return csv::format(c.*member);
            else return std::to_string(c.*member);
          }};
}

template <typename T>
Field synth_field(const char* key, T SyntheticSpec::*member) {
  return {key, [key, member](ExperimentConfig& c, std::string_view v, const auto&) { c.synthetic.*member = parse_number<T>(key, v); },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return csv::format(c.synthetic.*member);
            else return std::to_string(c.synthetic.*member);
          }};
}

template <typename T>
Field feature_field(const char* key, T FeatureParams::*member) {
  return {key, [key, member](ExperimentConfig& c, std::string_view v, const auto&) { c.features.*member = parse_number<T>(key, v); },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return csv::format(c.features.*member);
            else return std::to_string(c.features.*member);
          }};
}

Field bool_field(const char* key, bool ExperimentConfig::*member) {
  return {key, [key, member](ExperimentConfig& c, std::string_view v, const auto&) { c.*member = parse_bool(key, v); },
          [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"loss_head", [](ExperimentConfig& c, std::string_view v, const auto&) { c.loss_head = parse_loss_head(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.loss_head)); }},
      number_field("embedding_dim", &ExperimentConfig::embedding_dim),
      number_field("subspace_dim", &ExperimentConfig::subspace_dim),
      number_field("subclusters", &ExperimentConfig::subclusters),
      number_field("kmeans_k", &ExperimentConfig::kmeans_k),
      number_field("epochs", &ExperimentConfig::epochs),
      number_field("batch_size", &ExperimentConfig::batch_size),
      number_field("trials", &ExperimentConfig::trials),
      number_field("seed", &ExperimentConfig::seed),
      number_field("learning_rate", &ExperimentConfig::learning_rate),
      number_field("adam_beta1", &ExperimentConfig::adam_beta1),
      number_field("adam_beta2", &ExperimentConfig::adam_beta2),
      number_field("adam_epsilon", &ExperimentConfig::adam_epsilon),
      bool_field("mixup", &ExperimentConfig::mixup),
      bool_field("frozen_scale", &ExperimentConfig::frozen_scale),
      bool_field("negate_distance", &ExperimentConfig::negate_distance),
      number_field("cce_weight", &ExperimentConfig::cce_weight),
      {"center_init",
       [](ExperimentConfig& c, std::string_view v, const auto&) {
         if (v == "orthonormal") c.center_init = CenterInit::Orthonormal;
         else if (v == "glorot") c.center_init = CenterInit::RawGlorot;
         else throw bad_value("center_init", v);
       },
       [](const ExperimentConfig& c) {
         return std::string(c.center_init == CenterInit::Orthonormal ? "orthonormal" : "glorot");
       }},
      number_field("hidden_units", &ExperimentConfig::hidden_units),
      number_field("hidden_layers", &ExperimentConfig::hidden_layers),
      feature_field("frame", &FeatureParams::frame),
      feature_field("hop", &FeatureParams::hop),
      feature_field("spectrum_bins", &FeatureParams::spectrum_bins),
      feature_field("sample_rate", &FeatureParams::sample_rate),
      number_field("max_fpr", &ExperimentConfig::max_fpr),
      {"pauc_normalization",
       [](ExperimentConfig& c, std::string_view v, const auto&) {
         if (v == "mcclish") c.pauc_normalization = PaucNormalization::McClish;
         else if (v == "fraction") c.pauc_normalization = PaucNormalization::Fraction;
         else throw bad_value("pauc_normalization", v);
       },
       [](const ExperimentConfig& c) {
         return std::string(c.pauc_normalization == PaucNormalization::McClish ? "mcclish" : "fraction");
       }},
      number_field("threads", &ExperimentConfig::threads),
      {"dataset",
       [](ExperimentConfig& c, std::string_view v, const auto&) {
         if (v != "synthetic" && v != "manifest") throw bad_value("dataset", v);
         c.dataset = std::string(v);
       },
       [](const ExperimentConfig& c) { return c.dataset; }},
      {"manifest",
       [](ExperimentConfig& c, std::string_view v, const std::filesystem::path& base) {
         const std::filesystem::path p(v);
         c.manifest = p.is_relative() && !base.empty() ? base / p : p;
       },
       [](const ExperimentConfig& c) { return c.manifest.string(); }},
      synth_field("synth_sections", &SyntheticSpec::sections),
      synth_field("synth_latent_dim", &SyntheticSpec::latent_dim),
      synth_field("synth_spectrogram_dim", &SyntheticSpec::spectrogram_dim),
      synth_field("synth_spectrum_dim", &SyntheticSpec::spectrum_dim),
      synth_field("synth_train_source", &SyntheticSpec::train_source),
      synth_field("synth_train_target", &SyntheticSpec::train_target),
      synth_field("synth_test_per_domain", &SyntheticSpec::test_per_domain),
      synth_field("synth_latent_scale", &SyntheticSpec::latent_scale),
      synth_field("synth_section_offset", &SyntheticSpec::section_offset),
      synth_field("synth_noise", &SyntheticSpec::noise),
      synth_field("synth_perturbation", &SyntheticSpec::perturbation),
      synth_field("synth_domain_shift", &SyntheticSpec::domain_shift),
      synth_field("synth_seed", &SyntheticSpec::seed),
      {"synth_anomaly",
       [](ExperimentConfig& c, std::string_view v, const auto&) {
         if (v == "cross_section") c.synthetic.anomaly_mode = AnomalyMode::CrossSection;
         else if (v == "isotropic") c.synthetic.anomaly_mode = AnomalyMode::Isotropic;
         else throw bad_value("synth_anomaly", v);
       },
       [](const ExperimentConfig& c) {
         return std::string(c.synthetic.anomaly_mode == AnomalyMode::CrossSection ? "cross_section" : "isotropic");
       }},
      {"sweep_dims",
       [](ExperimentConfig& c, std::string_view v, const auto&) { c.sweep_dims = parse_int_list("sweep_dims", v); },
       [](const ExperimentConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.sweep_dims.size(); ++i) out += (i ? "," : "") + std::to_string(c.sweep_dims[i]);
         return out;
       }},
  };
  return table;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::ConfigInvalid, what);
}

}  // namespace

void validate(const ExperimentConfig& c) {
  require(c.embedding_dim >= 2 && c.embedding_dim % 2 == 0, "embedding_dim must be even and >= 2");
  if (c.subspace_dim < 1 || c.subspace_dim >= c.embedding_dim) {
    throw Error(ErrorKind::InvalidDims, "subspace_dim must satisfy 1 <= J < embedding_dim");
  }
  for (int dim : c.sweep_dims) {
    if (dim < 1 || dim >= c.embedding_dim) throw Error(ErrorKind::InvalidDims, "sweep dims must satisfy 1 <= J < D");
  }
  require(c.subclusters >= 1, "subclusters must be >= 1");
  require(c.kmeans_k >= 1, "kmeans_k must be >= 1");
  require(c.epochs >= 1, "epochs must be >= 1");
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.trials >= 1, "trials must be >= 1");
  require(c.learning_rate > 0.0, "learning_rate must be positive");
  require(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0 && c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0,
          "Adam betas must lie in [0, 1)");
  require(c.adam_epsilon > 0.0, "adam_epsilon must be positive");
  require(c.cce_weight >= 0.0, "cce_weight must be nonnegative");
  require(c.hidden_units >= 1 && c.hidden_layers >= 0, "invalid hidden layer settings");
  require(c.features.frame >= 2 && c.features.hop >= 1 && c.features.spectrum_bins >= 1 &&
              c.features.sample_rate > 0.0,
          "invalid feature parameters");
  if (!(c.max_fpr > 0.0 && c.max_fpr <= 1.0)) throw Error(ErrorKind::InvalidP, "max_fpr must lie in (0, 1]");
  require(c.threads >= 1, "threads must be >= 1");
  require(c.dataset == "synthetic" || !c.manifest.empty(), "dataset = manifest needs a manifest path");
  const SyntheticSpec& s = c.synthetic;
  if (s.sections < 1 || s.latent_dim < 1 || s.spectrogram_dim < 1 || s.spectrum_dim < 1 || s.train_source < 1 ||
      s.train_target < 0 || s.test_per_domain < 1 || s.latent_dim >= s.spectrogram_dim + s.spectrum_dim ||
      !(s.noise >= 0.0) || !(s.perturbation >= 0.0) || !(s.latent_scale >= 0.0) || !(s.section_offset >= 0.0) ||
      !(s.domain_shift >= 0.0)) {
    throw Error(ErrorKind::InvalidSpec, "invalid synthetic dataset parameters");
  }
}

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::ConfigInvalid, "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(text.substr(0, eq)));
    const std::string_view value = trim(text.substr(eq + 1));
    if (!seen.insert(key).second) throw Error(ErrorKind::ConfigInvalid, "duplicate key '" + key + "'");
    bool known = false;
    for (const Field& f : fields()) {
      if (key == f.key) {
        f.set(config, value, base_dir);
        known = true;
        break;
      }
    }
    if (!known) throw Error(ErrorKind::ConfigInvalid, "unknown key '" + key + "' on line " + std::to_string(line_no));
  }
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot read config " + path.string());
  return parse_config(in, path.parent_path());
}

std::string render_config(const ExperimentConfig& config) {
  std::ostringstream out;
  for (const Field& f : fields()) {
    const std::string value = f.get(config);
    if (std::string_view(f.key) == "manifest" && value.empty()) continue;
    out << f.key << " = " << value << '\n';
  }
  return out.str();
}

}  // namespace adaproj
