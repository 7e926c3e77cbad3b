#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "vager/errors.hpp"
#include "vager/features.hpp"

namespace vager {

// Complete undirected visual-analogy graph over base classes.
// A(i,j) = cosine(mean_i, mean_j); symmetric, unit diagonal.
struct AnalogyGraph {
  std::vector<std::int64_t> class_ids;
  Eigen::MatrixXd A;

  int n() const { return static_cast<int>(class_ids.size()); }
};

// Novel-to-base similarity vector a_new, same class order as the graph.
struct SimilarityVector {
  std::vector<std::int64_t> class_ids;
  Eigen::VectorXd a;

  int n() const { return static_cast<int>(a.size()); }
};

inline AnalogyGraph build_graph(const ClassMeans& means) {
  const int n = means.n();
  Eigen::VectorXd norms(n);
  for (int i = 0; i < n; ++i) {
    norms[i] = means.M.row(i).norm();
    if (norms[i] == 0.0)
      throw data_error("class " + std::to_string(means.class_ids[i]) +
                       " has zero-norm mean, cosine undefined");
  }
  AnalogyGraph g;
  g.class_ids = means.class_ids;
  g.A.resize(n, n);
  for (int i = 0; i < n; ++i) {
    g.A(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double cij =
          means.M.row(i).dot(means.M.row(j)) / (norms[i] * norms[j]);
      g.A(i, j) = cij;
      g.A(j, i) = cij;  // mirror the upper triangle, exact symmetry
    }
  }
  return g;
}

inline SimilarityVector novel_similarity(const ClassMeans& means,
                                         const Eigen::VectorXd& novel_mean) {
  if (novel_mean.size() != means.d())
    throw data_error("novel mean dimension mismatch");
  const double novel_norm = novel_mean.norm();
  if (novel_norm == 0.0) throw data_error("novel mean is the zero vector");
  SimilarityVector sv;
  sv.class_ids = means.class_ids;
  sv.a.resize(means.n());
  for (int i = 0; i < means.n(); ++i) {
    const double norm_i = means.M.row(i).norm();
    if (norm_i == 0.0)
      throw data_error("class " + std::to_string(means.class_ids[i]) +
                       " has zero-norm mean");
    sv.a[i] = means.M.row(i).dot(novel_mean) / (norm_i * novel_norm);
  }
  return sv;
}

// SR = mean of the K largest similarities over the mean of all of them.
inline double similarity_ratio(const SimilarityVector& sv, int K) {
  const int n = sv.n();
  if (K < 1 || K > n)
    throw data_error("K=" + std::to_string(K) + " out of range [1, " +
                     std::to_string(n) + "]");
  const double denom = sv.a.mean();
  if (denom == 0.0)
    throw data_error("mean similarity is zero, similarity ratio undefined");
  std::vector<double> sorted(sv.a.data(), sv.a.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double top = 0.0;
  for (int i = 0; i < K; ++i) top += sorted[i];
  return (top / K) / denom;
}

// k most similar base classes, descending; ties broken by ascending id.
inline std::vector<std::pair<std::int64_t, double>> top_k_neighbors(
    const SimilarityVector& sv, int k) {
  const int n = sv.n();
  if (k < 1 || k > n)
    throw data_error("k=" + std::to_string(k) + " out of range [1, " +
                     std::to_string(n) + "]");
  std::vector<std::pair<std::int64_t, double>> all;
  all.reserve(n);
  for (int i = 0; i < n; ++i) all.emplace_back(sv.class_ids[i], sv.a[i]);
  std::stable_sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  all.resize(k);
  return all;
}

}  // namespace vager
