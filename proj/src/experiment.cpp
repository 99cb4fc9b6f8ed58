#include "adaproj/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>

#include "adaproj/error.hpp"
#include "adaproj/random.hpp"
#include "adaproj/report.hpp"

namespace adaproj {

ClassIndex::ClassIndex(const Dataset& data) {
  std::set<std::string> keys;
  for (const Clip& c : data.clips) {
    if (c.split == Split::Train) keys.insert(c.class_key());
  }
  if (keys.empty()) throw Error(ErrorKind::EmptyDataset, "no training clips");
  keys_.assign(keys.begin(), keys.end());
  for (std::size_t i = 0; i < keys_.size(); ++i) index_[keys_[i]] = static_cast<int>(i);
}

int ClassIndex::of(const Clip& clip) const {
  const auto it = index_.find(clip.class_key());
  if (it == index_.end()) throw Error(ErrorKind::DataError, "clip '" + clip.id + "' has an unseen class");
  return it->second;
}

std::uint64_t trial_seed(const ExperimentConfig& config, int trial) {
  return config.seed + static_cast<std::uint64_t>(trial);
}

TrainConfig make_train_config(const ExperimentConfig& config, std::uint64_t seed) {
  TrainConfig t;
  t.epochs = config.epochs;
  t.batch_size = config.batch_size;
  t.adam = {config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon};
  t.mixup = config.mixup;
  t.frozen_scale = config.frozen_scale;
  t.seed = seed;
  t.head = {config.loss_head, config.negate_distance, config.cce_weight};
  t.architecture = {config.embedding_dim, config.hidden_units, config.hidden_layers};
  return t;
}

CenterBank make_center_bank(const ExperimentConfig& config, int num_classes, std::uint64_t seed) {
  return CenterBank::for_head(config.loss_head, num_classes, config.embedding_dim, config.subspace_dim,
                              config.subclusters, derive_seed(seed, 10), config.center_init);
}

TrainResult train_trial(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed) {
  const ClassIndex classes(data);
  TrainingSet set;
  set.num_classes = classes.size();
  set.feature_params = config.features;
  bool all_audio = true;
  for (const Clip& c : data.clips) {
    if (c.split != Split::Train) continue;
    set.samples.push_back({c.features, classes.of(c), c.domain, c.section_key()});
    all_audio = all_audio && c.waveform.has_value();
  }
  if (all_audio) {
    for (const Clip& c : data.clips) {
      if (c.split == Split::Train) set.waveforms.push_back(*c.waveform);
    }
  }
  const CenterBank bank = make_center_bank(config, classes.size(), seed);
  const std::uint64_t before = bank.fingerprint();
  TrainResult result = train(make_train_config(config, seed), set, bank);
  if (bank.fingerprint() != before) throw Error(ErrorKind::DataError, "center bank changed during training");
  return result;
}

ScoringOutput score_trial(const ExperimentConfig& config, const Dataset& data, const ModelParams& params,
                          std::uint64_t seed) {
  std::vector<BranchInputs> inputs;
  inputs.reserve(data.clips.size());
  for (const Clip& c : data.clips) inputs.push_back(c.features);
  const Matrix embeddings = embed_all(params, inputs);

  std::map<std::string, std::vector<Eigen::Index>> source_rows;
  std::map<std::string, std::vector<Eigen::Index>> target_rows;
  for (std::size_t i = 0; i < data.clips.size(); ++i) {
    const Clip& c = data.clips[i];
    if (c.split != Split::Train) continue;
    auto& rows = c.domain == Domain::Source ? source_rows[c.section_key()] : target_rows[c.section_key()];
    if (c.domain == Domain::Source || rows.size() < kMaxTargetReferences) rows.push_back(static_cast<Eigen::Index>(i));
  }

  ScoringOutput out;
  std::map<std::string, std::size_t> scorer_of;
  std::uint64_t section_counter = 0;
  for (const auto& [section, rows] : source_rows) {
    Matrix source(static_cast<Eigen::Index>(rows.size()), embeddings.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) source.row(static_cast<Eigen::Index>(r)) = embeddings.row(rows[r]);
    const auto& trows = target_rows[section];
    Matrix target(static_cast<Eigen::Index>(trows.size()), embeddings.cols());
    for (std::size_t r = 0; r < trows.size(); ++r) target.row(static_cast<Eigen::Index>(r)) = embeddings.row(trows[r]);
    scorer_of[section] = out.scorers.size();
    out.scorers.push_back(
        fit_scorer(source, target, config.kmeans_k, derive_seed(seed, 100 + section_counter++), section));
  }

  for (std::size_t i = 0; i < data.clips.size(); ++i) {
    const Clip& c = data.clips[i];
    if (c.split != Split::Test) continue;
    const auto it = scorer_of.find(c.section_key());
    if (it == scorer_of.end()) {
      throw Error(ErrorKind::DataError, "section '" + c.section_key() + "' has no source-domain training clips");
    }
    const Vector e = embeddings.row(static_cast<Eigen::Index>(i)).transpose();
    out.scores.push_back({c.id, c.section_key(), c.domain, c.label, anomaly_score(out.scorers[it->second], e)});
  }
  return out;
}

TrialResult evaluate_scores(const ExperimentConfig& config, std::vector<ScoredSample> scores) {
  TrialResult t;
  t.sections = evaluate_sections(scores, config.max_fpr, config.pauc_normalization);
  t.by_domain = evaluate_sections_by_domain(scores, config.max_fpr, config.pauc_normalization);
  t.official = official_score(t.sections);
  std::vector<double> aucs;
  std::vector<double> paucs;
  for (const SectionResult& r : t.sections) {
    aucs.push_back(r.auc);
    paucs.push_back(r.pauc);
  }
  t.auc_hmean = harmonic_mean(aucs);
  t.pauc_hmean = harmonic_mean(paucs);
  t.scores = std::move(scores);
  return t;
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "mean of an empty list");
  double sum = 0.0;
  for (double v : values) sum += v;
  MeanStd out;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return out;
}

std::vector<ScoredSample> ensemble_scores(const std::vector<std::vector<ScoredSample>>& per_trial) {
  if (per_trial.empty()) throw Error(ErrorKind::EmptyInput, "no trials to ensemble");
  std::vector<ScoredSample> out = per_trial.front();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double sum = 0.0;
    for (const auto& trial : per_trial) {
      if (trial.size() != out.size() || trial[i].sample_id != out[i].sample_id) {
        throw Error(ErrorKind::DataError, "trials scored different samples");
      }
      sum += trial[i].score;
    }
    out[i].score = sum / static_cast<double>(per_trial.size());
  }
  return out;
}

ExperimentResult aggregate_trials(const ExperimentConfig& config, std::vector<TrialResult> trials) {
  if (trials.empty()) throw Error(ErrorKind::EmptyInput, "no trials to aggregate");
  ExperimentResult r;
  r.head = config.loss_head;
  std::vector<double> official, auc_h, pauc_h;
  for (const TrialResult& t : trials) {
    official.push_back(t.official);
    auc_h.push_back(t.auc_hmean);
    pauc_h.push_back(t.pauc_hmean);
  }
  r.official = mean_std(official);
  r.auc_hmean = mean_std(auc_h);
  r.pauc_hmean = mean_std(pauc_h);

  const auto& first = trials.front().sections;
  for (std::size_t s = 0; s < first.size(); ++s) {
    std::vector<double> aucs, paucs;
    for (const TrialResult& t : trials) {
      if (t.sections.size() != first.size() || t.sections[s].section != first[s].section) {
        throw Error(ErrorKind::DataError, "trials evaluated different sections");
      }
      aucs.push_back(t.sections[s].auc);
      paucs.push_back(t.sections[s].pauc);
    }
    r.aggregate.push_back({first[s].section, first[s].domain_scope, mean_std(aucs), mean_std(paucs)});
  }
  r.aggregate.push_back({"ALL", "official", r.official, r.official});

  std::vector<std::vector<ScoredSample>> all_scores;
  for (const TrialResult& t : trials) all_scores.push_back(t.scores);
  r.ensemble = evaluate_scores(config, ensemble_scores(all_scores));
  r.trials = std::move(trials);
  return r;
}

namespace {

TrialResult run_trial(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed) {
  TrainResult trained = train_trial(config, data, seed);
  ScoringOutput scored = score_trial(config, data, trained.params, seed);
  TrialResult t = evaluate_scores(config, std::move(scored.scores));
  t.seed = seed;
  t.epoch_losses = std::move(trained.epoch_losses);
  t.final_scale = trained.final_scale.s_hat;
  return t;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& data,
                                const std::filesystem::path* out_dir) {
  validate(config);
  if (out_dir) std::filesystem::create_directories(*out_dir);
  std::vector<TrialResult> trials;
  for (int start = 0; start < config.trials; start += config.threads) {
    const int end = std::min(config.trials, start + config.threads);
    std::vector<std::future<TrialResult>> running;
    for (int i = start; i < end; ++i) {
      const std::uint64_t seed = trial_seed(config, i);
      running.push_back(std::async(config.threads > 1 ? std::launch::async : std::launch::deferred,
                                   [&config, &data, seed] { return run_trial(config, data, seed); }));
    }
    for (auto& f : running) {
      trials.push_back(f.get());
      if (out_dir) report::write_trial(*out_dir, trials.back());
    }
  }
  ExperimentResult result = aggregate_trials(config, std::move(trials));
  if (out_dir) report::write_experiment(*out_dir, result);
  return result;
}

std::vector<SweepRow> sweep_subspace_dim(const ExperimentConfig& config, const Dataset& data, std::vector<int> dims,
                                         const std::filesystem::path* out_dir) {
  if (dims.empty()) throw Error(ErrorKind::InvalidDims, "sweep needs at least one subspace dimension");
  std::sort(dims.begin(), dims.end());
  dims.erase(std::unique(dims.begin(), dims.end()), dims.end());
  for (int d : dims) {
    if (d < 1 || d >= config.embedding_dim) {
      throw Error(ErrorKind::InvalidDims, "sweep dimension " + std::to_string(d) + " must satisfy 1 <= J < D");
    }
  }
  std::vector<SweepRow> rows;
  for (int d : dims) {
    ExperimentConfig c = config;
    c.loss_head = LossHead::AdaProj;
    c.subspace_dim = d;
    std::filesystem::path sub;
    if (out_dir) sub = *out_dir / ("subspace_dim_" + std::to_string(d));
    const ExperimentResult r = run_experiment(c, data, out_dir ? &sub : nullptr);
    rows.push_back({d, r.official, r.auc_hmean, r.pauc_hmean});
  }
  if (out_dir) report::write_sweep(*out_dir / "sweep.csv", rows);
  return rows;
}

std::vector<ExperimentResult> compare_losses(const ExperimentConfig& config, const Dataset& data,
                                             const std::filesystem::path* out_dir) {
  std::vector<ExperimentResult> results;
  for (LossHead head : kAllLossHeads) {
    ExperimentConfig c = config;
    c.loss_head = head;
    std::filesystem::path sub;
    if (out_dir) sub = *out_dir / std::string(to_string(head));
    results.push_back(run_experiment(c, data, out_dir ? &sub : nullptr));
  }
  if (out_dir) report::write_comparison(*out_dir / "comparison.csv", results);
  return results;
}

}  // namespace adaproj
