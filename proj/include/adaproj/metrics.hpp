#pragma once

#include <span>
#include <string>
#include <vector>

#include "adaproj/types.hpp"

namespace adaproj {

/// One test clip after scoring. Higher scores mean "more anomalous".
struct ScoredSample {
  std::string sample_id;
  std::string section;
  Domain domain = Domain::Source;
  Label label = Label::Normal;
  double score = 0.0;
};

struct SectionResult {
  std::string section;
  std::string domain_scope;  // "all" for pooled domains, else "source" / "target"
  double auc = 0.0;
  double pauc = 0.0;
};

inline constexpr double kDefaultMaxFpr = 0.1;

/// How the partial area A_p over FPR in [0, p] is mapped to [0, 1].
enum class PaucNormalization {
  McClish,   // 0.5 * (1 + (A_p - p^2/2) / (p - p^2/2)); chance level 0.5
  Fraction,  // A_p / p; chance level p / 2
};

/// Mann-Whitney AUC: fraction of (anomaly, normal) pairs ordered correctly,
/// ties count one half. Throws EmptyClass if either list is empty.
double auc(std::span<const double> normal_scores, std::span<const double> anomaly_scores);

/// Area under the ROC curve for FPR in [0, max_fpr], standardized as chosen.
/// Tied scores form one ROC step; the FPR = max_fpr boundary is interpolated
/// linearly. A perfect detector scores 1 and pauc(..., 1.0) equals auc(...)
/// bit for bit under either normalization.
double pauc(std::span<const double> normal_scores, std::span<const double> anomaly_scores,
            double max_fpr = kDefaultMaxFpr, PaucNormalization normalization = PaucNormalization::McClish);

/// n / sum(1 / v). Any value <= 0 gives 0. Throws EmptyInput on an empty list.
double harmonic_mean(std::span<const double> values);

/// Harmonic mean over every section's AUC and pAUC.
double official_score(std::span<const SectionResult> results);

/// Pools both domains per section ("all"), sections in lexicographic order.
/// Samples with Label::Unknown are skipped.
std::vector<SectionResult> evaluate_sections(std::span<const ScoredSample> samples,
                                             double max_fpr = kDefaultMaxFpr,
                                             PaucNormalization normalization = PaucNormalization::McClish);

/// Per-domain breakdown, normal and anomalous samples of one domain only.
/// Section/domain pairs lacking either class are left out.
std::vector<SectionResult> evaluate_sections_by_domain(
    std::span<const ScoredSample> samples, double max_fpr = kDefaultMaxFpr,
    PaucNormalization normalization = PaucNormalization::McClish);

}  // namespace adaproj
