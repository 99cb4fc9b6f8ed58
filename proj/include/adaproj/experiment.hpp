#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "adaproj/config.hpp"
#include "adaproj/dataset.hpp"
#include "adaproj/embedding_net.hpp"
#include "adaproj/metrics.hpp"
#include "adaproj/scoring_backend.hpp"

namespace adaproj {

/// Auxiliary class labels derived from the training clips, sorted by key.
class ClassIndex {
 public:
  explicit ClassIndex(const Dataset& data);
  int of(const Clip& clip) const;
  int size() const { return static_cast<int>(keys_.size()); }
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
  std::map<std::string, int> index_;
};

inline constexpr int kMaxTargetReferences = 10;

/// Seed of trial `trial` (0-based) for a config.
std::uint64_t trial_seed(const ExperimentConfig& config, int trial);

TrainConfig make_train_config(const ExperimentConfig& config, std::uint64_t seed);

/// The frozen center bank of one trial.
CenterBank make_center_bank(const ExperimentConfig& config, int num_classes, std::uint64_t seed);

/// Trains one model on the train split.
TrainResult train_trial(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed);

struct ScoringOutput {
  std::vector<ScoredSample> scores;  // test clips in dataset order
  std::vector<ScorerModel> scorers;  // one per section, sorted by section key
};

/// Embeds every clip, fits the backend per section (source-domain train
/// embeddings plus up to ten target-domain references) and scores the test split.
ScoringOutput score_trial(const ExperimentConfig& config, const Dataset& data, const ModelParams& params,
                          std::uint64_t seed);

struct TrialResult {
  std::uint64_t seed = 0;
  std::vector<SectionResult> sections;   // domains pooled
  std::vector<SectionResult> by_domain;  // supplementary breakdown
  double official = 0.0;                 // hmean of every AUC and pAUC
  double auc_hmean = 0.0;                // hmean of the section AUCs
  double pauc_hmean = 0.0;               // hmean of the section pAUCs
  std::vector<ScoredSample> scores;
  std::vector<double> epoch_losses;
  double final_scale = 0.0;
};

/// Metrics of one set of scores.
TrialResult evaluate_scores(const ExperimentConfig& config, std::vector<ScoredSample> scores);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};
MeanStd mean_std(const std::vector<double>& values);

struct AggregateRow {
  std::string section;
  std::string domain_scope;
  MeanStd auc;
  MeanStd pauc;
};

struct ExperimentResult {
  LossHead head = LossHead::AdaProj;
  std::vector<TrialResult> trials;
  std::vector<AggregateRow> aggregate;  // sections, then an ALL/official row
  MeanStd official;
  MeanStd auc_hmean;
  MeanStd pauc_hmean;
  TrialResult ensemble;                 // metrics of per-sample mean scores
};

/// Per-sample mean of the anomaly scores of several trials (same sample order).
std::vector<ScoredSample> ensemble_scores(const std::vector<std::vector<ScoredSample>>& per_trial);

/// Aggregates finished trials.
ExperimentResult aggregate_trials(const ExperimentConfig& config, std::vector<TrialResult> trials);

/// Train -> embed -> fit backend -> score -> evaluate for every trial. When
/// `out_dir` is given each trial's files are written as soon as it finishes.
ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& data,
                                const std::filesystem::path* out_dir = nullptr);

struct SweepRow {
  int subspace_dim = 0;
  MeanStd official;
  MeanStd auc_hmean;
  MeanStd pauc_hmean;
};

/// AdaProj runs over ascending, de-duplicated subspace dimensions with shared seeds.
std::vector<SweepRow> sweep_subspace_dim(const ExperimentConfig& config, const Dataset& data,
                                         std::vector<int> dims, const std::filesystem::path* out_dir = nullptr);

/// One run per loss head, in the order of kAllLossHeads.
std::vector<ExperimentResult> compare_losses(const ExperimentConfig& config, const Dataset& data,
                                             const std::filesystem::path* out_dir = nullptr);

}  // namespace adaproj
