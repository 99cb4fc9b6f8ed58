#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "adaproj/geometry.hpp"

namespace adaproj {

inline constexpr int kDefaultKMeans = 32;
inline constexpr int kKMeansMaxIterations = 100;
/// Inputs with at most this many k-partitions are solved by exhaustive search.
inline constexpr double kExactKMeansPartitions = 4096;

struct KMeansResult {
  Matrix means;                     // k x D, unit rows
  std::vector<int> assignment;      // cluster index per input row
  std::vector<double> objective;    // sum of (1 - cos) after every iteration
  int iterations = 0;
};

/// Spherical k-means over the unit rows of `points`: cosine assignment, means
/// renormalized after each update, stopped at an assignment fixpoint or after
/// `max_iterations`. Seeds by greedy farthest-point selection starting from a
/// point picked with `seed`; `restarts` runs start from different points and
/// the lowest final objective wins. Converged runs are refined with
/// single-point moves that strictly lower the objective. k is capped at the
/// number of rows; tiny inputs (see kExactKMeansPartitions) get the exact optimum.
KMeansResult spherical_kmeans(const Matrix& points, int k, std::uint64_t seed, int restarts = 4,
                              int max_iterations = kKMeansMaxIterations);

/// Sum of (1 - <x_i, m_assigned>) over all rows.
double kmeans_objective(const Matrix& points, const Matrix& means, const std::vector<int>& assignment);

/// Source-domain cluster means plus target-domain reference embeddings.
struct ScorerModel {
  Matrix means;        // k x D
  Matrix target_refs;  // r x D, r may be 0
  std::string section;

  Eigen::Index dim() const { return means.cols(); }
};

/// Fits the backend for one section. Rows of both matrices must be unit norm.
/// Throws EmptyInput if there is no source embedding.
ScorerModel fit_scorer(const Matrix& source_embeddings, const Matrix& target_embeddings,
                       int k = kDefaultKMeans, std::uint64_t seed = 0, std::string section = {});

/// Smallest cosine distance 1 - <x, r> over all means and target references, in [0, 2].
double anomaly_score(const ScorerModel& model, const Vector& embedding);

// "ADPJ-KM1" | u32 D | u32 n_means | u32 n_refs | string section | f64 means | f64 refs
void save_scorer(std::ostream& out, const ScorerModel& model);
ScorerModel load_scorer(std::istream& in);
void save_scorer(const std::filesystem::path& path, const ScorerModel& model);
ScorerModel load_scorer(const std::filesystem::path& path);

}  // namespace adaproj
