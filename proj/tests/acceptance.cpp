// Acceptance checks: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adaproj/config.hpp"
#include "adaproj/csv.hpp"
#include "adaproj/dataset.hpp"
#include "adaproj/experiment.hpp"
#include "adaproj/geometry.hpp"
#include "adaproj/loss_heads.hpp"
#include "adaproj/metrics.hpp"
#include "adaproj/scoring_backend.hpp"

namespace fs = std::filesystem;
using namespace adaproj;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

Vector gaussian(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

Vector unit(Eigen::Index n, std::mt19937_64& rng) { return gaussian(n, rng).normalized(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------

Outcome in_span_distance() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1);
  const AdaptiveScaleState scale{1.0, 1, true};
  int within = 0;
  int total = 0;
  double worst = 0.0;
  for (int b = 0; b < 100; ++b) {
    const SubspaceBasis basis = random_basis(32, 512, 1000 + b);
    const CenterBank bank = CenterBank::from_centers(CenterBank::Kind::Subspace, {basis.rows()});
    for (int i = 0; i < 100; ++i) {
      const Vector x = (basis.rows().transpose() * gaussian(32, rng)).normalized();
      const double d = adaproj_logits(x, bank, scale)(0);
      worst = std::max(worst, d);
      within += d <= 1e-8 ? 1 : 0;
      ++total;
    }
  }
  const double elapsed = seconds_since(start);
  return {within == total && elapsed < 10.0,
          std::to_string(within) + "/" + std::to_string(total) + " within 1e-8, max " + csv::format(worst) + ", " +
              fmt(elapsed, 2) + " s"};
}

Outcome chord_identity() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> dim(1, 63);
  double worst = 0.0;
  int draws = 0;
  while (draws < 1000) {
    const SubspaceBasis basis = random_basis(dim(rng), 64, 5000 + draws);
    const Vector x = unit(64, rng);
    const Vector p = span_project(x, basis);
    if (p.norm() <= kNormEpsilon) continue;
    const double lhs = (x - sphere_project(p).values()).squaredNorm();
    worst = std::max(worst, std::abs(lhs - 2.0 * (1.0 - subspace_cosine(x, basis))));
    ++draws;
  }
  return {worst <= 1e-8, "1000 draws, max deviation " + csv::format(worst)};
}

Outcome gradient_checks() {
  const double h = 1e-5;
  std::ostringstream detail;
  bool ok = true;
  for (LossHead head : kAllLossHeads) {
    std::mt19937_64 rng(3 + static_cast<int>(head));
    std::uniform_real_distribution<double> s_draw(0.5, 10.0);
    std::uniform_real_distribution<double> lambda(0.0, 1.0);
    std::uniform_int_distribution<int> cls(0, 5);
    const HeadSettings settings{head, true, 1.0};
    int passed = 0;
    double worst = 0.0;
    for (int draw = 0; draw < 50; ++draw) {
      const CenterBank bank = CenterBank::for_head(head, 6, 24, 4, 4, 700 + draw);
      const AdaptiveScaleState scale{s_draw(rng), 6, false};
      const TargetDistribution target = TargetDistribution::mixed(6, cls(rng), cls(rng), lambda(rng));
      const Vector x = gaussian(24, rng);
      const Vector analytic = evaluate_loss(x, target, bank, scale, settings).gradient;
      Vector numeric(x.size());
      Vector probe = x;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe(i) = x(i) + h;
        const double up = evaluate_loss(probe, target, bank, scale, settings).value;
        probe(i) = x(i) - h;
        const double down = evaluate_loss(probe, target, bank, scale, settings).value;
        probe(i) = x(i);
        numeric(i) = (up - down) / (2.0 * h);
      }
      const double rel = (analytic - numeric).norm() / std::max({analytic.norm(), numeric.norm(), 1e-8});
      worst = std::max(worst, rel);
      passed += rel < 1e-4 ? 1 : 0;
    }
    ok = ok && passed == 50;
    detail << to_string(head) << " " << passed << "/50 (max " << csv::format(worst) << ") ";
  }
  return {ok, detail.str()};
}

// Exhaustive-threshold ROC area for FPR in [0, p].
double roc_oracle(const std::vector<double>& normal, const std::vector<double>& anomalous, double p) {
  std::set<double, std::greater<>> thresholds(normal.begin(), normal.end());
  thresholds.insert(anomalous.begin(), anomalous.end());
  double prev_f = 0.0;
  double prev_t = 0.0;
  double area = 0.0;
  for (double th : thresholds) {
    double f = static_cast<double>(std::count_if(normal.begin(), normal.end(), [th](double s) { return s >= th; })) /
               normal.size();
    double t = static_cast<double>(
                   std::count_if(anomalous.begin(), anomalous.end(), [th](double s) { return s >= th; })) /
               anomalous.size();
    if (prev_f >= p) break;
    if (f > p) {
      t = prev_t + (t - prev_t) * (p - prev_f) / (f - prev_f);
      f = p;
    }
    area += (f - prev_f) * (t + prev_t) / 2.0;
    prev_f = f;
    prev_t = t;
  }
  return area;
}

Outcome metric_oracle() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> size(2, 64);
  int passed = 0;
  bool exact = true;
  double worst = 0.0;
  for (int draw = 0; draw < 200; ++draw) {
    const int n = size(rng);
    std::uniform_int_distribution<int> split(1, n - 1);
    std::uniform_int_distribution<int> level(0, 1 + draw % 10);
    const int n_normal = split(rng);
    std::vector<double> normal(n_normal);
    std::vector<double> anomalous(n - n_normal);
    for (double& v : normal) v = 0.5 * level(rng);
    for (double& v : anomalous) v = 0.5 * level(rng) + 0.25 * (draw % 3);
    const double p = kDefaultMaxFpr;
    const double full = roc_oracle(normal, anomalous, 1.0);
    const double part = roc_oracle(normal, anomalous, p);
    const double mcclish = std::clamp(0.5 * (1.0 + (part - p * p / 2.0) / (p - p * p / 2.0)), 0.0, 1.0);
    const double e1 = std::abs(auc(normal, anomalous) - full);
    const double e2 = std::abs(pauc(normal, anomalous, p) - mcclish);
    const double e3 = std::abs(pauc(normal, anomalous, p, PaucNormalization::Fraction) - part / p);
    worst = std::max({worst, e1, e2, e3});
    passed += (e1 <= 1e-9 && e2 <= 1e-9 && e3 <= 1e-9) ? 1 : 0;
    exact = exact && pauc(normal, anomalous, 1.0) == auc(normal, anomalous);
  }
  return {passed == 200 && exact, std::to_string(passed) + "/200 within 1e-9 (max " + csv::format(worst) +
                                      "), pauc(p=1) == auc " + (exact ? "exactly" : "NOT exactly")};
}

Outcome backend_oracle() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> size(2, 8);
  int passed = 0;
  double worst = 0.0;
  for (int draw = 0; draw < 50; ++draw) {
    const int n = size(rng);
    Matrix pts(n, 4);
    for (int i = 0; i < n; ++i) pts.row(i) = unit(4, rng).transpose();
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
      Vector a = Vector::Zero(4);
      Vector b = Vector::Zero(4);
      int na = 0;
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          a += pts.row(i).transpose();
          ++na;
        } else {
          b += pts.row(i).transpose();
        }
      }
      best = std::min(best, na - a.norm() + (n - na) - b.norm());
    }
    const KMeansResult r = spherical_kmeans(pts, 2, draw);
    const double gap = std::abs(kmeans_objective(pts, r.means, r.assignment) - best);
    worst = std::max(worst, gap);
    passed += gap <= 1e-9 ? 1 : 0;
  }
  return {passed == 50, std::to_string(passed) + "/50 within 1e-9 of the 2^n bipartition optimum (max gap " +
                            csv::format(worst) + ")"};
}

Outcome null_and_separable(const ExperimentConfig& base) {
  const auto start = Clock::now();
  ExperimentConfig null_cfg = base;
  null_cfg.trials = 5;
  null_cfg.synthetic.perturbation = 0.0;
  const double null_score = run_experiment(null_cfg, generate_synthetic(null_cfg.synthetic)).official.mean;

  ExperimentConfig sep_cfg = base;
  sep_cfg.trials = 5;
  sep_cfg.synthetic.perturbation = 5.0 * sep_cfg.synthetic.noise;
  const double sep_score = run_experiment(sep_cfg, generate_synthetic(sep_cfg.synthetic)).official.mean;
  const double elapsed = seconds_since(start);
  const bool ok = null_score >= 0.4 && null_score <= 0.6 && sep_score >= 0.85 && elapsed < 300.0;
  return {ok, "null " + fmt(null_score) + " in [0.4, 0.6], separable " + fmt(sep_score) + " >= 0.85, " +
                  fmt(elapsed, 1) + " s"};
}

Outcome headline_direction(const ExperimentConfig& base, const Dataset& data) {
  ExperimentConfig c = base;
  c.trials = 10;
  c.loss_head = LossHead::AdaProj;
  const ExperimentResult adaproj = run_experiment(c, data);
  c.loss_head = LossHead::AdaCos;
  const ExperimentResult adacos = run_experiment(c, data);
  return {adaproj.official.mean >= adacos.official.mean,
          "adaproj " + fmt(adaproj.official.mean) + " +- " + fmt(adaproj.official.std) + " vs adacos " +
              fmt(adacos.official.mean) + " +- " + fmt(adacos.official.std) + " (10 trials)"};
}

Outcome sweep_harness(const ExperimentConfig& base, const Dataset& data, const fs::path& work) {
  ExperimentConfig c = base;
  c.trials = 3;
  const std::vector<int> dims{4, 8, 16, 32, 64};
  const fs::path a = work / "sweep_a";
  const fs::path b = work / "sweep_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const auto rows = sweep_subspace_dim(c, data, dims, &a);
  sweep_subspace_dim(c, data, dims, &b);
  const std::string csv_a = slurp(a / "sweep.csv");
  const bool deterministic = !csv_a.empty() && csv_a == slurp(b / "sweep.csv");

  const csv::Table t = csv::read(a / "sweep.csv");
  bool shape = t.rows.size() == dims.size();
  for (std::size_t i = 0; shape && i < dims.size(); ++i) shape = std::stoi(t.rows[i][0]) == dims[i];

  const auto low = sweep_subspace_dim(c, data, {1});
  double at8 = 0.0;
  for (const SweepRow& r : rows) {
    if (r.subspace_dim == 8) at8 = r.official.mean;
  }
  const double at1 = low.front().official.mean;
  std::ostringstream curve;
  for (const SweepRow& r : rows) curve << "J=" << r.subspace_dim << ":" << fmt(r.official.mean, 3) << " ";
  return {deterministic && shape && at8 >= at1,
          curve.str() + "| J=8 " + fmt(at8) + " >= J=1 " + fmt(at1) +
              (deterministic ? ", byte-identical reruns" : ", reruns DIFFER") + (shape ? "" : ", bad CSV shape")};
}

std::vector<fs::path> csv_files(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome compare_determinism(const ExperimentConfig& base, const Dataset& data, const fs::path& work) {
  ExperimentConfig c = base;
  c.trials = 2;
  const fs::path a = work / "compare_a";
  const fs::path b = work / "compare_b";
  fs::remove_all(a);
  fs::remove_all(b);
  compare_losses(c, data, &a);
  compare_losses(c, data, &b);
  const auto files_a = csv_files(a);
  const auto files_b = csv_files(b);
  int differing = 0;
  for (const fs::path& f : files_a) differing += slurp(a / f) == slurp(b / f) ? 0 : 1;
  const bool ok = !files_a.empty() && files_a == files_b && differing == 0 && fs::exists(a / "comparison.csv");
  return {ok, std::to_string(files_a.size()) + " CSV files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  fs::path work = fs::temp_directory_path() / "adaproj_acceptance";
  app.add_option("--work-dir", work, "Scratch directory for experiment outputs");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  // The published benchmark: default config and default synthetic spec.
  const ExperimentConfig base;
  const Dataset data = generate_synthetic(base.synthetic);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {1, "in-span distance", in_span_distance},
      {2, "chord identity", chord_identity},
      {3, "gradient checks", gradient_checks},
      {4, "metric oracle", metric_oracle},
      {5, "backend oracle", backend_oracle},
      {6, "null and separable synthetic", [&] { return null_and_separable(base); }},
      {7, "adaproj >= adacos", [&] { return headline_direction(base, data); }},
      {8, "subspace sweep", [&] { return sweep_harness(base, data, work); }},
      {9, "compare determinism", [&] { return compare_determinism(base, data, work); }},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt(seconds_since(start), 1) << " s]" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
