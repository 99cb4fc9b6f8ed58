#include "adaproj/scoring_backend.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "adaproj/binary_io.hpp"
#include "adaproj/error.hpp"

namespace adaproj {
namespace {

constexpr std::string_view kScorerMagic = "ADPJ-KM1";

void require_unit_rows(const Matrix& m, const char* what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double norm = m.row(r).norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-6) {
      throw Error(ErrorKind::DataError, std::string(what) + " row " + std::to_string(r) + " is not unit norm");
    }
  }
}

std::vector<int> assign(const Matrix& points, const Matrix& means) {
  const Matrix cosines = points * means.transpose();
  std::vector<int> out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Eigen::Index best = 0;
    cosines.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

Matrix farthest_point_seeds(const Matrix& points, int k, Eigen::Index first) {
  const Eigen::Index n = points.rows();
  Matrix means(k, points.cols());
  std::vector<bool> chosen(n, false);
  Vector best_cos = Vector::Constant(n, -2.0);
  Eigen::Index next = first;
  for (int c = 0; c < k; ++c) {
    means.row(c) = points.row(next);
    chosen[next] = true;
    best_cos = best_cos.cwiseMax(points * points.row(next).transpose());
    double farthest = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!chosen[i] && 1.0 - best_cos(i) > farthest) {
        farthest = 1.0 - best_cos(i);
        next = i;
      }
    }
  }
  return means;
}

void update_means(const Matrix& points, const std::vector<int>& assignment, Matrix& means) {
  const int k = static_cast<int>(means.rows());
  Matrix sums = Matrix::Zero(k, points.cols());
  std::vector<int> counts(k, 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    sums.row(assignment[i]) += points.row(i);
    ++counts[assignment[i]];
  }
  std::vector<int> empty;
  for (int c = 0; c < k; ++c) {
    const double norm = sums.row(c).norm();
    if (counts[c] == 0 || norm <= kNormEpsilon) {
      empty.push_back(c);
    } else {
      means.row(c) = sums.row(c) / norm;
    }
  }
  // Empty clusters take the point farthest from its own mean.
  std::vector<bool> used(points.rows(), false);
  for (int c : empty) {
    double farthest = -1.0;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (used[i] || counts[assignment[i]] <= 1) continue;
      const double d = 1.0 - points.row(i).dot(means.row(assignment[i]));
      if (d > farthest) {
        farthest = d;
        pick = i;
      }
    }
    if (pick < 0) continue;
    used[pick] = true;
    means.row(c) = points.row(pick);
  }
}

// Single-point moves that strictly lower the objective. A cluster S costs
// |S| - ||sum S|| with its optimal mean, so each move is scored exactly.
bool hartigan_moves(const Matrix& points, KMeansResult& r) {
  const int k = static_cast<int>(r.means.rows());
  Matrix sums = Matrix::Zero(k, points.cols());
  std::vector<int> counts(k, 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    sums.row(r.assignment[i]) += points.row(i);
    ++counts[r.assignment[i]];
  }
  bool moved = false;
  for (bool changed = true; changed;) {
    changed = false;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const int from = r.assignment[i];
      if (counts[from] <= 1) continue;
      const double from_before = sums.row(from).norm();
      const double from_after = (sums.row(from) - points.row(i)).norm();
      int best = from;
      double best_gain = 1e-12;
      for (int to = 0; to < k; ++to) {
        if (to == from) continue;
        const double gain = from_after + (sums.row(to) + points.row(i)).norm() - from_before - sums.row(to).norm();
        if (gain > best_gain) {
          best_gain = gain;
          best = to;
        }
      }
      if (best == from) continue;
      sums.row(from) -= points.row(i);
      sums.row(best) += points.row(i);
      --counts[from];
      ++counts[best];
      r.assignment[i] = best;
      changed = moved = true;
    }
  }
  if (moved) update_means(points, r.assignment, r.means);
  return moved;
}

KMeansResult run_lloyd(const Matrix& points, int k, Eigen::Index first, int max_iterations) {
  KMeansResult r;
  r.means = farthest_point_seeds(points, k, first);
  r.assignment = assign(points, r.means);
  for (r.iterations = 1; r.iterations <= max_iterations; ++r.iterations) {
    update_means(points, r.assignment, r.means);
    r.objective.push_back(kmeans_objective(points, r.means, r.assignment));
    std::vector<int> next = assign(points, r.means);
    if (next == r.assignment) {
      if (!hartigan_moves(points, r)) break;
      r.objective.push_back(kmeans_objective(points, r.means, r.assignment));
      next = assign(points, r.means);
    }
    r.assignment = std::move(next);
  }
  r.iterations = std::min(r.iterations, max_iterations);
  r.assignment = assign(points, r.means);
  const double final_objective = kmeans_objective(points, r.means, r.assignment);
  if (final_objective < r.objective.back()) r.objective.push_back(final_objective);
  return r;
}

// Number of partitions of n points into k nonempty clusters, saturating at cap + 1.
double partition_count(Eigen::Index n, int k, double cap) {
  std::vector<double> row(k + 1, 0.0);
  row[0] = 1.0;
  for (Eigen::Index i = 1; i <= n; ++i) {
    for (int j = std::min<Eigen::Index>(i, k); j >= 1; --j) row[j] = std::min(cap + 1.0, j * row[j] + row[j - 1]);
    row[0] = 0.0;
  }
  return row[k];
}

// Exhaustive search over restricted-growth labelings with exactly k blocks.
KMeansResult exact_kmeans(const Matrix& points, int k) {
  const Eigen::Index n = points.rows();
  std::vector<int> labels(n, 0);
  std::vector<int> prefix_max(n, 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_labels;
  Matrix sums(k, points.cols());
  const auto visit = [&] {
    sums.setZero();
    for (Eigen::Index i = 0; i < n; ++i) sums.row(labels[i]) += points.row(i);
    double cost = static_cast<double>(n);
    for (int c = 0; c < k; ++c) cost -= sums.row(c).norm();
    if (cost < best - 1e-15) {
      best = cost;
      best_labels = labels;
    }
  };
  // Odometer over labels[i] <= prefix_max[i - 1] + 1.
  while (true) {
    if (prefix_max[n - 1] == k - 1) visit();
    Eigen::Index i = n - 1;
    while (i > 0 && (labels[i] == k - 1 || labels[i] > prefix_max[i - 1])) --i;
    if (i == 0) break;
    ++labels[i];
    prefix_max[i] = std::max(prefix_max[i - 1], labels[i]);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      labels[j] = 0;
      prefix_max[j] = prefix_max[j - 1];
    }
  }
  KMeansResult r;
  r.assignment = best_labels;
  r.means = Matrix::Zero(k, points.cols());
  update_means(points, r.assignment, r.means);
  r.iterations = 1;
  r.objective.push_back(kmeans_objective(points, r.means, r.assignment));
  return r;
}

}  // namespace

double kmeans_objective(const Matrix& points, const Matrix& means, const std::vector<int>& assignment) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) total += 1.0 - points.row(i).dot(means.row(assignment[i]));
  return total;
}

KMeansResult spherical_kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts, int max_iterations) {
  if (points.rows() == 0) throw Error(ErrorKind::EmptyInput, "k-means needs at least one point");
  if (k < 1 || restarts < 1 || max_iterations < 1) {
    throw Error(ErrorKind::ConfigInvalid, "k-means needs k, restarts and iterations >= 1");
  }
  require_unit_rows(points, "k-means input");
  const int k_eff = static_cast<int>(std::min<Eigen::Index>(k, points.rows()));
  if (partition_count(points.rows(), k_eff, kExactKMeansPartitions) <= kExactKMeansPartitions) {
    if (k_eff == points.rows()) {
      KMeansResult r;
      r.means = points;
      r.assignment.resize(points.rows());
      std::iota(r.assignment.begin(), r.assignment.end(), 0);
      r.iterations = 1;
      r.objective.push_back(kmeans_objective(points, r.means, r.assignment));
      return r;
    }
    return exact_kmeans(points, k_eff);
  }

  std::vector<Eigen::Index> starts(points.rows());
  std::iota(starts.begin(), starts.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(starts.begin(), starts.end(), rng);
  starts.resize(std::min<std::size_t>(starts.size(), restarts));

  KMeansResult best;
  for (Eigen::Index first : starts) {
    KMeansResult candidate = run_lloyd(points, k_eff, first, max_iterations);
    if (best.objective.empty() || candidate.objective.back() < best.objective.back()) best = std::move(candidate);
  }
  return best;
}

ScorerModel fit_scorer(const Matrix& source_embeddings, const Matrix& target_embeddings, int k,
                       std::uint64_t seed, std::string section) {
  if (source_embeddings.rows() == 0) throw Error(ErrorKind::EmptyInput, "no source-domain embeddings");
  if (target_embeddings.rows() > 0 && target_embeddings.cols() != source_embeddings.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "source and target embeddings differ in dimension");
  }
  require_unit_rows(target_embeddings, "target reference");
  ScorerModel model;
  model.means = spherical_kmeans(source_embeddings, k, seed).means;
  model.target_refs = target_embeddings.rows() > 0 ? target_embeddings : Matrix(0, source_embeddings.cols());
  model.section = std::move(section);
  return model;
}

double anomaly_score(const ScorerModel& model, const Vector& embedding) {
  if (embedding.size() != model.dim()) throw Error(ErrorKind::DimensionMismatch, "embedding dim differs from scorer");
  double best = model.means.rows() > 0 ? (model.means * embedding).maxCoeff() : -1.0;
  if (model.target_refs.rows() > 0) best = std::max(best, (model.target_refs * embedding).maxCoeff());
  return std::clamp(1.0 - best, 0.0, 2.0);
}

void save_scorer(std::ostream& out, const ScorerModel& model) {
  binary::write_magic(out, kScorerMagic);
  binary::write_u32(out, static_cast<std::uint32_t>(model.dim()));
  binary::write_u32(out, static_cast<std::uint32_t>(model.means.rows()));
  binary::write_u32(out, static_cast<std::uint32_t>(model.target_refs.rows()));
  binary::write_string(out, model.section);
  binary::write_matrix(out, model.means);
  binary::write_matrix(out, model.target_refs);
}

ScorerModel load_scorer(std::istream& in) {
  binary::read_magic(in, kScorerMagic);
  const auto dim = binary::read_u32(in);
  const auto n_means = binary::read_u32(in);
  const auto n_refs = binary::read_u32(in);
  ScorerModel model;
  model.section = binary::read_string(in);
  model.means = binary::read_matrix(in, n_means, dim);
  model.target_refs = binary::read_matrix(in, n_refs, dim);
  return model;
}

void save_scorer(const std::filesystem::path& path, const ScorerModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::DataError, "cannot write " + path.string());
  save_scorer(out, model);
}

ScorerModel load_scorer(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::DataError, "cannot read " + path.string());
  return load_scorer(in);
}

}  // namespace adaproj
