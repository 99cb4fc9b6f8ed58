#include "adaproj/report.hpp"

#include <fstream>

#include "adaproj/csv.hpp"
#include "adaproj/error.hpp"

namespace adaproj::report {
namespace {

std::ofstream open(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::DataError, "cannot write " + path.string());
  return out;
}

using csv::format;

std::string seed_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

}  // namespace

void write_results(const std::filesystem::path& path, const std::vector<SectionResult>& sections) {
  auto out = open(path);
  out << "section,domain_scope,auc,pauc\n";
  for (const SectionResult& r : sections) {
    out << csv::join({r.section, r.domain_scope, format(r.auc), format(r.pauc)}) << '\n';
  }
  const double official = official_score(sections);
  out << "ALL,official," << format(official) << ',' << format(official) << '\n';
}

void write_domain_results(const std::filesystem::path& path, const std::vector<SectionResult>& rows) {
  auto out = open(path);
  out << "section,domain_scope,auc,pauc\n";
  for (const SectionResult& r : rows) {
    out << csv::join({r.section, r.domain_scope, format(r.auc), format(r.pauc)}) << '\n';
  }
}

void write_scores(const std::filesystem::path& path, const std::vector<ScoredSample>& scores) {
  auto out = open(path);
  out << "sample_id,section,domain,label,score\n";
  for (const ScoredSample& s : scores) {
    out << csv::join({s.sample_id, s.section, std::string(to_string(s.domain)), std::string(to_string(s.label)),
                      format(s.score)})
        << '\n';
  }
}

std::vector<ScoredSample> read_scores(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const std::size_t id = t.column("sample_id"), section = t.column("section"), domain = t.column("domain"),
                    label = t.column("label"), score = t.column("score");
  std::vector<ScoredSample> out;
  for (const auto& row : t.rows) {
    ScoredSample s{row[id], row[section], parse_domain(row[domain]), parse_label(row[label]), 0.0};
    try {
      std::size_t used = 0;
      s.score = std::stod(row[score], &used);
      if (used != row[score].size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw Error(ErrorKind::DataError, path.string() + ": bad score '" + row[score] + "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_loss_history(const std::filesystem::path& path, const std::vector<TrialResult>& trials) {
  auto out = open(path);
  out << "seed,epoch,loss\n";
  for (const TrialResult& t : trials) {
    for (std::size_t e = 0; e < t.epoch_losses.size(); ++e) {
      out << t.seed << ',' << e + 1 << ',' << format(t.epoch_losses[e]) << '\n';
    }
  }
}

void write_aggregate(const std::filesystem::path& path, const ExperimentResult& result) {
  auto out = open(path);
  out << "section,domain_scope,auc_mean,auc_std,pauc_mean,pauc_std\n";
  for (const AggregateRow& r : result.aggregate) {
    out << csv::join({r.section, r.domain_scope, format(r.auc.mean), format(r.auc.std), format(r.pauc.mean),
                      format(r.pauc.std)})
        << '\n';
  }
}

void write_comparison(const std::filesystem::path& path, const std::vector<ExperimentResult>& results) {
  auto out = open(path);
  out << "loss_head,auc_mean,auc_std,pauc_mean,pauc_std,official_mean,official_std\n";
  for (const ExperimentResult& r : results) {
    out << csv::join({std::string(to_string(r.head)), format(r.auc_hmean.mean), format(r.auc_hmean.std),
                      format(r.pauc_hmean.mean), format(r.pauc_hmean.std), format(r.official.mean),
                      format(r.official.std)})
        << '\n';
  }
}

void write_sweep(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  auto out = open(path);
  out << "subspace_dim,official_mean,official_std,auc_mean,pauc_mean\n";
  for (const SweepRow& r : rows) {
    out << r.subspace_dim << ',' << format(r.official.mean) << ',' << format(r.official.std) << ','
        << format(r.auc_hmean.mean) << ',' << format(r.pauc_hmean.mean) << '\n';
  }
}

void write_trial(const std::filesystem::path& dir, const TrialResult& trial) {
  const std::string name = seed_name(trial.seed);
  write_results(dir / ("results_" + name + ".csv"), trial.sections);
  write_domain_results(dir / ("results_by_domain_" + name + ".csv"), trial.by_domain);
  write_scores(dir / ("scores_" + name + ".csv"), trial.scores);
}

void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result) {
  write_aggregate(dir / "aggregate.csv", result);
  write_results(dir / "results_ensemble.csv", result.ensemble.sections);
  write_scores(dir / "scores_ensemble.csv", result.ensemble.scores);
  write_loss_history(dir / "loss_history.csv", result.trials);
}

}  // namespace adaproj::report
