#include "adaproj/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "adaproj/error.hpp"

namespace adaproj {
namespace {

struct TieGroup {
  double normals = 0;    // count of normal scores equal to the group score
  double anomalies = 0;  // count of anomalous scores equal to the group score
};

// Scores grouped by value, highest first.
std::vector<TieGroup> descending_groups(std::span<const double> normal_scores,
                                        std::span<const double> anomaly_scores) {
  if (normal_scores.empty() || anomaly_scores.empty()) {
    throw Error(ErrorKind::EmptyClass, "AUC needs at least one normal and one anomalous score");
  }
  std::vector<std::pair<double, bool>> all;
  all.reserve(normal_scores.size() + anomaly_scores.size());
  for (double s : normal_scores) all.emplace_back(s, false);
  for (double s : anomaly_scores) all.emplace_back(s, true);
  for (const auto& [s, _] : all) {
    if (!std::isfinite(s)) throw Error(ErrorKind::DataError, "non-finite score");
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  std::vector<TieGroup> groups;
  for (std::size_t i = 0; i < all.size();) {
    TieGroup g;
    std::size_t j = i;
    for (; j < all.size() && all[j].first == all[i].first; ++j) {
      (all[j].second ? g.anomalies : g.normals) += 1;
    }
    groups.push_back(g);
    i = j;
  }
  return groups;
}

}  // namespace

double auc(std::span<const double> normal_scores, std::span<const double> anomaly_scores) {
  const auto groups = descending_groups(normal_scores, anomaly_scores);
  // Walk from the lowest score up; counts stay exact integers / halves.
  double pairs = 0.0;
  double normals_below = 0.0;
  for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
    pairs += it->anomalies * normals_below + 0.5 * it->anomalies * it->normals;
    normals_below += it->normals;
  }
  return pairs / (static_cast<double>(normal_scores.size()) * static_cast<double>(anomaly_scores.size()));
}

double pauc(std::span<const double> normal_scores, std::span<const double> anomaly_scores, double max_fpr,
            PaucNormalization normalization) {
  if (!(max_fpr > 0.0 && max_fpr <= 1.0)) throw Error(ErrorKind::InvalidP, "max FPR must lie in (0, 1]");
  const auto groups = descending_groups(normal_scores, anomaly_scores);
  const double n_normal = static_cast<double>(normal_scores.size());
  const double n_anomaly = static_cast<double>(anomaly_scores.size());
  const double fp_limit = max_fpr * n_normal;

  // Area in units of (false positives x true positives).
  double area = 0.0;
  double fp = 0.0;
  double tp = 0.0;
  for (const TieGroup& g : groups) {
    if (fp >= fp_limit) break;
    if (fp + g.normals <= fp_limit) {
      area += g.normals * tp + 0.5 * g.normals * g.anomalies;
    } else {
      const double width = fp_limit - fp;
      const double tp_at_limit = tp + g.anomalies * (width / g.normals);
      area += 0.5 * width * (tp + tp_at_limit);
    }
    fp += g.normals;
    tp += g.anomalies;
  }
  const double partial = area / (n_normal * n_anomaly);
  if (max_fpr == 1.0) return partial;
  if (normalization == PaucNormalization::Fraction) return std::min(partial / max_fpr, 1.0);
  const double chance = 0.5 * max_fpr * max_fpr;
  return std::clamp(0.5 * (1.0 + (partial - chance) / (max_fpr - chance)), 0.0, 1.0);
}

double harmonic_mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "harmonic mean of an empty list");
  double reciprocal_sum = 0.0;
  for (double v : values) {
    if (!(v > 0.0)) return 0.0;
    reciprocal_sum += 1.0 / v;
  }
  return static_cast<double>(values.size()) / reciprocal_sum;
}

double official_score(std::span<const SectionResult> results) {
  if (results.empty()) throw Error(ErrorKind::EmptyInput, "no section results");
  std::vector<double> values;
  values.reserve(2 * results.size());
  for (const SectionResult& r : results) {
    values.push_back(r.auc);
    values.push_back(r.pauc);
  }
  return harmonic_mean(values);
}

namespace {

struct ClassScores {
  std::vector<double> normal;
  std::vector<double> anomalous;
};

void add_score(ClassScores& cs, const ScoredSample& s) {
  if (s.label == Label::Normal) cs.normal.push_back(s.score);
  if (s.label == Label::Anomalous) cs.anomalous.push_back(s.score);
}

}  // namespace

std::vector<SectionResult> evaluate_sections(std::span<const ScoredSample> samples, double max_fpr,
                                             PaucNormalization normalization) {
  std::map<std::string, ClassScores> by_section;
  for (const ScoredSample& s : samples) add_score(by_section[s.section], s);
  std::vector<SectionResult> out;
  for (const auto& [section, cs] : by_section) {
    out.push_back({section, "all", auc(cs.normal, cs.anomalous), pauc(cs.normal, cs.anomalous, max_fpr, normalization)});
  }
  return out;
}

std::vector<SectionResult> evaluate_sections_by_domain(std::span<const ScoredSample> samples, double max_fpr,
                                                       PaucNormalization normalization) {
  std::map<std::pair<std::string, Domain>, ClassScores> grouped;
  for (const ScoredSample& s : samples) add_score(grouped[{s.section, s.domain}], s);
  std::vector<SectionResult> out;
  for (const auto& [key, cs] : grouped) {
    if (cs.normal.empty() || cs.anomalous.empty()) continue;
    out.push_back({key.first, std::string(to_string(key.second)), auc(cs.normal, cs.anomalous),
                   pauc(cs.normal, cs.anomalous, max_fpr, normalization)});
  }
  return out;
}

}  // namespace adaproj
