#pragma once

#include <filesystem>
#include <vector>

#include "adaproj/experiment.hpp"

// CSV emitters. Numbers use the shortest round-trip representation.
namespace adaproj::report {

// section,domain_scope,auc,pauc ; last row ALL,official,<hmean>,<hmean>
void write_results(const std::filesystem::path& path, const std::vector<SectionResult>& sections);
// Per-domain breakdown in the same layout, without the ALL row.
void write_domain_results(const std::filesystem::path& path, const std::vector<SectionResult>& rows);
// sample_id,section,domain,label,score
void write_scores(const std::filesystem::path& path, const std::vector<ScoredSample>& scores);
std::vector<ScoredSample> read_scores(const std::filesystem::path& path);
// seed,epoch,loss
void write_loss_history(const std::filesystem::path& path, const std::vector<TrialResult>& trials);
// section,domain_scope,auc_mean,auc_std,pauc_mean,pauc_std
void write_aggregate(const std::filesystem::path& path, const ExperimentResult& result);
// loss_head,auc_mean,auc_std,pauc_mean,pauc_std,official_mean,official_std
void write_comparison(const std::filesystem::path& path, const std::vector<ExperimentResult>& results);
// subspace_dim,official_mean,official_std,auc_mean,pauc_mean
void write_sweep(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

/// Every per-trial file of one trial (results, per-domain results, scores).
void write_trial(const std::filesystem::path& dir, const TrialResult& trial);
/// Aggregate, ensemble and loss-history files of a finished run.
void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result);

}  // namespace adaproj::report
