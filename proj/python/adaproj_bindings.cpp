#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adaproj/config.hpp"
#include "adaproj/dataset.hpp"
#include "adaproj/error.hpp"
#include "adaproj/experiment.hpp"
#include "adaproj/features.hpp"
#include "adaproj/geometry.hpp"
#include "adaproj/loss_heads.hpp"
#include "adaproj/metrics.hpp"
#include "adaproj/scoring_backend.hpp"

namespace py = pybind11;
using namespace adaproj;

namespace {

PaucNormalization parse_normalization(const std::string& name) {
  if (name == "mcclish") return PaucNormalization::McClish;
  if (name == "fraction") return PaucNormalization::Fraction;
  throw Error(ErrorKind::ConfigInvalid, "normalization must be 'mcclish' or 'fraction', got '" + name + "'");
}

Waveform make_waveform(std::vector<double> samples, double sample_rate) { return {std::move(samples), sample_rate}; }

const std::filesystem::path* optional_path(const std::optional<std::filesystem::path>& p) {
  return p ? &*p : nullptr;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "AdaProj anomalous sound detection core";

  static py::exception<Error> error(m, "AdaprojError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::reinterpret_borrow<py::object>(error)(py::str(e.what()));
      py::setattr(instance, "kind", py::str(to_string(e.kind())));
      PyErr_SetObject(error.ptr(), instance.ptr());
    }
  });

  // Geometry.
  m.def("sphere_project", [](const Vector& x) { return sphere_project(x).values(); }, py::arg("x"));
  m.def(
      "span_project", [](const Vector& x, const Matrix& basis) { return span_project(x, SubspaceBasis::from_orthonormal_rows(basis)); },
      py::arg("x"), py::arg("basis"));
  m.def(
      "subspace_cosine",
      [](const Vector& x, const Matrix& basis) { return subspace_cosine(x, SubspaceBasis::from_orthonormal_rows(basis)); },
      py::arg("x"), py::arg("basis"));
  m.def("orthonormalize", [](const Matrix& raw) { return orthonormalize(raw).rows(); }, py::arg("rows"));
  m.def(
      "random_basis", [](Eigen::Index j, Eigen::Index d, std::uint64_t seed) { return random_basis(j, d, seed).rows(); },
      py::arg("subspace_dim"), py::arg("ambient_dim"), py::arg("seed"));

  // Loss heads.
  py::enum_<LossHead>(m, "LossHead")
      .value("COMPACTNESS", LossHead::Compactness)
      .value("COMPACTNESS_CCE", LossHead::CompactnessCce)
      .value("ADACOS", LossHead::AdaCos)
      .value("SUBCLUSTER_ADACOS", LossHead::SubclusterAdaCos)
      .value("ADAPROJ", LossHead::AdaProj);
  m.def("parse_loss_head", [](const std::string& name) { return parse_loss_head(name); }, py::arg("name"));
  m.def("loss_head_name", [](LossHead h) { return std::string(to_string(h)); }, py::arg("head"));

  py::enum_<CenterInit>(m, "CenterInit")
      .value("ORTHONORMAL", CenterInit::Orthonormal)
      .value("RAW_GLOROT", CenterInit::RawGlorot);

  py::class_<CenterBank>(m, "CenterBank")
      .def_static("for_head", &CenterBank::for_head, py::arg("head"), py::arg("num_classes"), py::arg("dim"),
                  py::arg("subspace_dim"), py::arg("subclusters"), py::arg("seed"),
                  py::arg("init") = CenterInit::Orthonormal)
      .def_property_readonly("num_classes", &CenterBank::num_classes)
      .def_property_readonly("dim", &CenterBank::dim)
      .def("centers", &CenterBank::centers, py::arg("class_index"))
      .def("fingerprint", &CenterBank::fingerprint);

  py::class_<AdaptiveScaleState>(m, "ScaleState")
      .def(py::init([](double s_hat, int num_classes, bool frozen) { return AdaptiveScaleState{s_hat, num_classes, frozen}; }),
           py::arg("s_hat"), py::arg("num_classes"), py::arg("frozen") = false)
      .def_static("initial", &AdaptiveScaleState::initial, py::arg("num_classes"), py::arg("frozen") = false)
      .def_readwrite("s_hat", &AdaptiveScaleState::s_hat)
      .def_readwrite("num_classes", &AdaptiveScaleState::num_classes)
      .def_readwrite("frozen", &AdaptiveScaleState::frozen);

  m.def(
      "head_logits",
      [](const Vector& x, const CenterBank& bank, const AdaptiveScaleState& scale, LossHead head, bool negate) {
        return head_logits(x, bank, scale, HeadSettings{head, negate, 1.0});
      },
      py::arg("x"), py::arg("bank"), py::arg("scale"), py::arg("head"), py::arg("negate_distance") = true);
  m.def(
      "evaluate_loss",
      [](const Vector& x, const Vector& target_weights, const CenterBank& bank, const AdaptiveScaleState& scale,
         LossHead head, bool negate, double cce_weight) {
        const LossOutput out = evaluate_loss(x, TargetDistribution::from_weights(target_weights), bank, scale,
                                             HeadSettings{head, negate, cce_weight});
        return py::make_tuple(out.value, out.gradient);
      },
      py::arg("x"), py::arg("target"), py::arg("bank"), py::arg("scale"), py::arg("head"),
      py::arg("negate_distance") = true, py::arg("cce_weight") = 1.0,
      "Loss value and gradient with respect to the raw embedding x.");

  // Metrics.
  m.def(
      "auc", [](const std::vector<double>& normal, const std::vector<double>& anomalous) { return auc(normal, anomalous); },
      py::arg("normal"), py::arg("anomalous"));
  m.def(
      "pauc",
      [](const std::vector<double>& normal, const std::vector<double>& anomalous, double max_fpr,
         const std::string& normalization) {
        return pauc(normal, anomalous, max_fpr, parse_normalization(normalization));
      },
      py::arg("normal"), py::arg("anomalous"), py::arg("max_fpr") = kDefaultMaxFpr,
      py::arg("normalization") = "mcclish");
  m.def("harmonic_mean", [](const std::vector<double>& v) { return harmonic_mean(v); }, py::arg("values"));
  m.def(
      "official_score",
      [](const std::vector<std::pair<double, double>>& auc_pauc) {
        std::vector<SectionResult> sections;
        for (const auto& [a, p] : auc_pauc) sections.push_back({"", "all", a, p});
        return official_score(sections);
      },
      py::arg("sections"), "Harmonic mean over (auc, pauc) pairs of every section.");

  // Features.
  m.def(
      "magnitude_spectrogram",
      [](std::vector<double> samples, int frame, int hop, double rate) {
        return magnitude_spectrogram(make_waveform(std::move(samples), rate), frame, hop);
      },
      py::arg("samples"), py::arg("frame") = 1024, py::arg("hop") = 512, py::arg("sample_rate") = 16000.0);
  m.def(
      "magnitude_spectrum",
      [](std::vector<double> samples, int bins, double rate) {
        return magnitude_spectrum(make_waveform(std::move(samples), rate), bins);
      },
      py::arg("samples"), py::arg("bins") = 4096, py::arg("sample_rate") = 16000.0);
  m.def(
      "extract_branch_inputs",
      [](std::vector<double> samples, double rate) {
        FeatureParams params;
        params.sample_rate = rate;
        const BranchInputs b = extract_branch_inputs(make_waveform(std::move(samples), rate), params);
        return py::make_tuple(b.spectrogram, b.spectrum);
      },
      py::arg("samples"), py::arg("sample_rate") = 16000.0);
  m.def(
      "read_wav",
      [](const std::filesystem::path& path) {
        const Waveform w = read_wav(path);
        return py::make_tuple(w.samples, w.sample_rate);
      },
      py::arg("path"));
  m.def(
      "write_wav",
      [](const std::filesystem::path& path, std::vector<double> samples, double rate) {
        write_wav(path, make_waveform(std::move(samples), rate));
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 16000.0);

  // Scoring backend.
  m.def(
      "spherical_kmeans",
      [](const Matrix& points, int k, std::uint64_t seed) {
        const KMeansResult r = spherical_kmeans(points, k, seed);
        return py::make_tuple(r.means, r.assignment, r.objective.back());
      },
      py::arg("points"), py::arg("k"), py::arg("seed") = 0, "Returns (means, assignment, objective).");

  py::class_<ScorerModel>(m, "Scorer")
      .def_readonly("means", &ScorerModel::means)
      .def_readonly("target_refs", &ScorerModel::target_refs)
      .def_readonly("section", &ScorerModel::section)
      .def("score", [](const ScorerModel& s, const Vector& x) { return anomaly_score(s, x); }, py::arg("embedding"))
      .def("save", [](const ScorerModel& s, const std::filesystem::path& p) { save_scorer(p, s); }, py::arg("path"))
      .def_static("load", [](const std::filesystem::path& p) { return load_scorer(p); }, py::arg("path"));
  m.def("fit_scorer", &fit_scorer, py::arg("source"), py::arg("target"), py::arg("k") = kDefaultKMeans,
        py::arg("seed") = 0, py::arg("section") = std::string{});

  // Harness.
  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("sections", &SyntheticSpec::sections)
      .def_readwrite("latent_dim", &SyntheticSpec::latent_dim)
      .def_readwrite("spectrogram_dim", &SyntheticSpec::spectrogram_dim)
      .def_readwrite("spectrum_dim", &SyntheticSpec::spectrum_dim)
      .def_readwrite("train_source", &SyntheticSpec::train_source)
      .def_readwrite("train_target", &SyntheticSpec::train_target)
      .def_readwrite("test_per_domain", &SyntheticSpec::test_per_domain)
      .def_readwrite("noise", &SyntheticSpec::noise)
      .def_readwrite("perturbation", &SyntheticSpec::perturbation)
      .def_readwrite("domain_shift", &SyntheticSpec::domain_shift)
      .def_readwrite("seed", &SyntheticSpec::seed);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_static(
          "parse",
          [](const std::string& text) {
            std::istringstream in(text);
            return parse_config(in);
          },
          py::arg("text"))
      .def_static("load", &load_config, py::arg("path"))
      .def("render", [](const ExperimentConfig& c) { return render_config(c); })
      .def("validate", [](const ExperimentConfig& c) { validate(c); })
      .def_readwrite("loss_head", &ExperimentConfig::loss_head)
      .def_readwrite("embedding_dim", &ExperimentConfig::embedding_dim)
      .def_readwrite("subspace_dim", &ExperimentConfig::subspace_dim)
      .def_readwrite("subclusters", &ExperimentConfig::subclusters)
      .def_readwrite("kmeans_k", &ExperimentConfig::kmeans_k)
      .def_readwrite("epochs", &ExperimentConfig::epochs)
      .def_readwrite("batch_size", &ExperimentConfig::batch_size)
      .def_readwrite("trials", &ExperimentConfig::trials)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("hidden_units", &ExperimentConfig::hidden_units)
      .def_readwrite("hidden_layers", &ExperimentConfig::hidden_layers)
      .def_readwrite("mixup", &ExperimentConfig::mixup)
      .def_readwrite("threads", &ExperimentConfig::threads)
      .def_readwrite("synthetic", &ExperimentConfig::synthetic);

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", [](const Dataset& d) { return d.clips.size(); })
      .def("write", [](const Dataset& d, const std::filesystem::path& dir) { write_dataset(dir, d); }, py::arg("dir"));
  m.def("generate_synthetic", &generate_synthetic, py::arg("spec"));
  m.def("load_dataset", &load_dataset, py::arg("config"));

  py::class_<MeanStd>(m, "MeanStd")
      .def_readonly("mean", &MeanStd::mean)
      .def_readonly("std", &MeanStd::std)
      .def("__repr__", [](const MeanStd& s) { return std::to_string(s.mean) + " +- " + std::to_string(s.std); });

  py::class_<ExperimentResult>(m, "ExperimentResult")
      .def_property_readonly("loss_head", [](const ExperimentResult& r) { return r.head; })
      .def_readonly("official", &ExperimentResult::official)
      .def_readonly("auc_hmean", &ExperimentResult::auc_hmean)
      .def_readonly("pauc_hmean", &ExperimentResult::pauc_hmean)
      .def_property_readonly("trial_official", [](const ExperimentResult& r) {
        std::vector<double> v;
        for (const TrialResult& t : r.trials) v.push_back(t.official);
        return v;
      });

  py::class_<SweepRow>(m, "SweepRow")
      .def_readonly("subspace_dim", &SweepRow::subspace_dim)
      .def_readonly("official", &SweepRow::official)
      .def_readonly("auc_hmean", &SweepRow::auc_hmean)
      .def_readonly("pauc_hmean", &SweepRow::pauc_hmean);

  m.def(
      "run_experiment",
      [](const ExperimentConfig& c, const Dataset& d, const std::optional<std::filesystem::path>& out) {
        py::gil_scoped_release release;
        return run_experiment(c, d, optional_path(out));
      },
      py::arg("config"), py::arg("dataset"), py::arg("out_dir") = py::none());
  m.def(
      "compare_losses",
      [](const ExperimentConfig& c, const Dataset& d, const std::optional<std::filesystem::path>& out) {
        py::gil_scoped_release release;
        return compare_losses(c, d, optional_path(out));
      },
      py::arg("config"), py::arg("dataset"), py::arg("out_dir") = py::none());
  m.def(
      "sweep_subspace_dim",
      [](const ExperimentConfig& c, const Dataset& d, std::vector<int> dims,
         const std::optional<std::filesystem::path>& out) {
        py::gil_scoped_release release;
        return sweep_subspace_dim(c, d, std::move(dims), optional_path(out));
      },
      py::arg("config"), py::arg("dataset"), py::arg("dims"), py::arg("out_dir") = py::none());
}
