#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "adaproj/metrics.hpp"
#include "test_support.hpp"

using namespace adaproj;
using adaproj::testing::thrown_kind;

namespace {

using Scores = std::vector<double>;

struct RocPoint {
  double fpr;
  double tpr;
};

// ROC by sweeping every distinct threshold: a clip is flagged when its score
// is >= the threshold. Points run from (0, 0) to (1, 1).
std::vector<RocPoint> exhaustive_roc(const Scores& normal, const Scores& anomalous) {
  std::set<double, std::greater<>> thresholds(normal.begin(), normal.end());
  thresholds.insert(anomalous.begin(), anomalous.end());
  std::vector<RocPoint> roc{{0.0, 0.0}};
  for (double t : thresholds) {
    const auto fp = std::count_if(normal.begin(), normal.end(), [t](double s) { return s >= t; });
    const auto tp = std::count_if(anomalous.begin(), anomalous.end(), [t](double s) { return s >= t; });
    roc.push_back({static_cast<double>(fp) / normal.size(), static_cast<double>(tp) / anomalous.size()});
  }
  return roc;
}

// Trapezoidal area under the ROC for FPR in [0, p].
double oracle_area(const Scores& normal, const Scores& anomalous, double p) {
  const auto roc = exhaustive_roc(normal, anomalous);
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    const RocPoint a = roc[i - 1];
    RocPoint b = roc[i];
    if (a.fpr >= p) break;
    if (b.fpr > p) {
      const double t = (p - a.fpr) / (b.fpr - a.fpr);
      b = {p, a.tpr + t * (b.tpr - a.tpr)};
    }
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return area;
}

double oracle_mcclish(double area, double p) {
  const double lo = p * p / 2.0;
  return 0.5 * (1.0 + (area - lo) / (p - lo));
}

Scores draw_scores(std::size_t n, int levels, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, levels - 1);
  Scores s(n);
  for (double& v : s) v = 0.25 * pick(rng);
  return s;
}

ScoredSample sample(std::string section, Domain d, Label l, double score) {
  return {section + "_" + std::to_string(score), std::move(section), d, l, score};
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("auc examples") {
  CHECK(auc(Scores{1, 2}, Scores{3, 4}) == 1.0);
  CHECK(auc(Scores{3, 4}, Scores{1, 2}) == 0.0);
  CHECK(auc(Scores{0.1, 0.4}, Scores{0.35, 0.8}) == 0.75);
  CHECK(auc(Scores{1, 1}, Scores{1}) == 0.5);
  CHECK(thrown_kind([] { auc(Scores{}, Scores{1}); }) == ErrorKind::EmptyClass);
  CHECK(thrown_kind([] { auc(Scores{1}, Scores{}); }) == ErrorKind::EmptyClass);
}

TEST_CASE("pauc examples") {
  for (double p : {0.01, 0.1, 0.5, 1.0}) {
    CHECK(pauc(Scores{1, 2, 3}, Scores{4, 5}, p) == 1.0);
    CHECK(pauc(Scores{1, 2, 3}, Scores{4, 5}, p, PaucNormalization::Fraction) == 1.0);
  }
  CHECK(pauc(Scores{0.1, 0.4}, Scores{0.35, 0.8}, 1.0) == auc(Scores{0.1, 0.4}, Scores{0.35, 0.8}));
  CHECK(thrown_kind([] { pauc(Scores{1}, Scores{2}, 0.0); }) == ErrorKind::InvalidP);
  CHECK(thrown_kind([] { pauc(Scores{1}, Scores{2}, 1.5); }) == ErrorKind::InvalidP);
}

TEST_CASE("interleaved tied scores match the exhaustive-threshold oracle") {
  Scores normal;
  for (int i = 1; i <= 10; ++i) normal.push_back(i);
  const Scores anomalous = normal;
  CHECK(auc(normal, anomalous) == 0.5);
  const double area = oracle_area(normal, anomalous, 0.1);
  CHECK(std::abs(pauc(normal, anomalous, 0.1, PaucNormalization::Fraction) - area / 0.1) <= 1e-9);
  CHECK(std::abs(pauc(normal, anomalous, 0.1) - oracle_mcclish(area, 0.1)) <= 1e-9);
  CHECK(pauc(normal, anomalous, 0.1) == doctest::Approx(0.5));
}

TEST_CASE("auc and pauc match the oracle on random tied score sets") {
  std::mt19937_64 rng(81);
  std::uniform_int_distribution<int> total(2, 64);
  std::uniform_real_distribution<double> unit(0.02, 1.0);
  for (int draw = 0; draw < 200; ++draw) {
    const int n = total(rng);
    std::uniform_int_distribution<int> split(1, n - 1);
    const int n_normal = split(rng);
    const int levels = 2 + draw % 12;
    const Scores normal = draw_scores(n_normal, levels, rng);
    const Scores anomalous = draw_scores(n - n_normal, levels + draw % 3, rng);
    const double p = draw % 4 == 0 ? 0.1 : unit(rng);

    CHECK(std::abs(auc(normal, anomalous) - oracle_area(normal, anomalous, 1.0)) <= 1e-9);
    const double area = oracle_area(normal, anomalous, p);
    CHECK(std::abs(pauc(normal, anomalous, p, PaucNormalization::Fraction) - std::min(area / p, 1.0)) <= 1e-9);
    CHECK(std::abs(pauc(normal, anomalous, p) - std::clamp(oracle_mcclish(area, p), 0.0, 1.0)) <= 1e-9);
    CHECK(pauc(normal, anomalous, 1.0) == auc(normal, anomalous));
    CHECK(pauc(normal, anomalous, 1.0, PaucNormalization::Fraction) == auc(normal, anomalous));
  }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
  std::mt19937_64 rng(82);
  for (int draw = 0; draw < 50; ++draw) {
    const Scores normal = draw_scores(20, 8, rng);
    const Scores anomalous = draw_scores(15, 8, rng);
    Scores tn = normal;
    Scores ta = anomalous;
    for (double& v : tn) v = std::exp(3.0 * v) - 7.0;
    for (double& v : ta) v = std::exp(3.0 * v) - 7.0;
    CHECK(auc(tn, ta) == auc(normal, anomalous));
    CHECK(pauc(tn, ta) == pauc(normal, anomalous));
  }
}

TEST_CASE("swapping the classes complements the auc when there are no ties") {
  std::mt19937_64 rng(83);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int draw = 0; draw < 50; ++draw) {
    Scores a(13);
    Scores b(9);
    for (double& v : a) v = g(rng);
    for (double& v : b) v = g(rng) + 0.5;
    CHECK(auc(a, b) + auc(b, a) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("chance-level pauc is about one half under McClish and p/2 as a fraction") {
  std::mt19937_64 rng(84);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scores a(4000);
  Scores b(4000);
  for (double& v : a) v = u(rng);
  for (double& v : b) v = u(rng);
  CHECK(pauc(a, b) == doctest::Approx(0.5).epsilon(0.05));
  CHECK(pauc(a, b, 0.1, PaucNormalization::Fraction) == doctest::Approx(0.05).epsilon(0.2));
}

TEST_CASE("harmonic mean examples and bounds") {
  CHECK(harmonic_mean(Scores{0.5, 1.0}) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(harmonic_mean(Scores{0.37, 0.37, 0.37}) == doctest::Approx(0.37).epsilon(1e-15));
  CHECK(harmonic_mean(Scores{0.5, 0.0, 1.0}) == 0.0);
  CHECK(harmonic_mean(Scores{0.5, -0.1}) == 0.0);
  CHECK(thrown_kind([] { harmonic_mean(Scores{}); }) == ErrorKind::EmptyInput);
  std::mt19937_64 rng(85);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int draw = 0; draw < 100; ++draw) {
    Scores v(1 + draw % 9);
    for (double& x : v) x = u(rng);
    double mean = 0.0;
    for (double x : v) mean += x / v.size();
    CHECK(harmonic_mean(v) <= mean + 1e-15);
  }
}

TEST_CASE("official score examples") {
  CHECK(official_score(std::vector<SectionResult>{{"a", "all", 0.8, 0.8}}) == doctest::Approx(0.8));
  CHECK(official_score(std::vector<SectionResult>{{"a", "all", 1, 1}, {"b", "all", 1, 1}}) == 1.0);
  const double v = official_score(std::vector<SectionResult>{{"a", "all", 0.9, 0.6}, {"b", "all", 0.7, 0.5}});
  CHECK(v == doctest::Approx(4.0 / (1 / 0.9 + 1 / 0.6 + 1 / 0.7 + 1 / 0.5)).epsilon(1e-15));
  CHECK(v == doctest::Approx(0.64450).epsilon(1e-5));
  CHECK(thrown_kind([] { official_score(std::vector<SectionResult>{}); }) == ErrorKind::EmptyInput);
}

TEST_CASE("official score matches the oracle on random multi-section data") {
  std::mt19937_64 rng(86);
  for (int draw = 0; draw < 30; ++draw) {
    std::vector<ScoredSample> samples;
    std::vector<double> expected;
    for (int s = 0; s < 3; ++s) {
      const std::string name = "sec_" + std::to_string(s);
      const Scores normal = draw_scores(4 + draw % 10, 6, rng);
      Scores anomalous = draw_scores(3 + draw % 7, 6, rng);
      for (double& v : anomalous) v += 0.3;
      for (double v : normal) samples.push_back(sample(name, Domain::Source, Label::Normal, v));
      for (double v : anomalous) samples.push_back(sample(name, Domain::Target, Label::Anomalous, v));
      expected.push_back(oracle_area(normal, anomalous, 1.0));
      expected.push_back(std::clamp(oracle_mcclish(oracle_area(normal, anomalous, 0.1), 0.1), 0.0, 1.0));
    }
    std::shuffle(samples.begin(), samples.end(), rng);
    double reciprocal = 0.0;
    bool zero = false;
    for (double e : expected) {
      if (e <= 0.0) zero = true;
      reciprocal += 1.0 / e;
    }
    const double oracle = zero ? 0.0 : expected.size() / reciprocal;
    CHECK(std::abs(official_score(evaluate_sections(samples)) - oracle) <= 1e-9);
  }
}

TEST_CASE("evaluate_sections pools domains, sorts sections and skips unknown labels") {
  std::vector<ScoredSample> samples{
      sample("b", Domain::Source, Label::Normal, 0.1),   sample("b", Domain::Target, Label::Anomalous, 0.9),
      sample("a", Domain::Target, Label::Normal, 0.5),   sample("a", Domain::Source, Label::Anomalous, 0.4),
      sample("a", Domain::Source, Label::Unknown, 99.0), sample("a", Domain::Source, Label::Normal, 0.2),
  };
  const auto r = evaluate_sections(samples);
  REQUIRE(r.size() == 2);
  CHECK(r[0].section == "a");
  CHECK(r[0].domain_scope == "all");
  CHECK(r[0].auc == 0.5);
  CHECK(r[1].section == "b");
  CHECK(r[1].auc == 1.0);

  const auto by_domain = evaluate_sections_by_domain(samples);
  REQUIRE(by_domain.size() == 1);
  CHECK(by_domain[0].section == "a");
  CHECK(by_domain[0].domain_scope == "source");
  CHECK(by_domain[0].auc == 1.0);
}

}  // TEST_SUITE
