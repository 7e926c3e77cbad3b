#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <algorithm>
#include <limits>
#include <string>

#include "vager/errors.hpp"
#include "vager/graph.hpp"
#include "vager/vager.hpp"

namespace vager {

// Embedding inferred for a novel class; residual is the retained
// least-squares objective value at the solution.
struct NovelEmbedding {
  Eigen::VectorXd v;  // length q
  double residual = 0.0;
};

// 2 * ||a - v V^T||_2^2  (the regularizer on ||v|| is dropped)
inline double oos_objective(const Eigen::VectorXd& v, const Eigen::VectorXd& a,
                            const Eigen::MatrixXd& V) {
  if (v.size() != V.cols() || a.size() != V.rows())
    throw data_error("out-of-sample objective shape mismatch");
  return 2.0 * (a - V * v).squaredNorm();
}

namespace detail {

// Moore-Penrose pseudo-inverse of V^T via SVD of V, returned as the n x q
// matrix P with v = a P. Singular values below max(n,q)*eps*sigma_max are
// treated as zero, so rank-deficient V yields the minimum-norm solution.
// ridge > 0 switches to Tikhonov filtering sigma/(sigma^2 + ridge).
inline Eigen::MatrixXd pinv_vt(const Eigen::MatrixXd& V, double ridge = 0.0) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      V, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sigma = svd.singularValues();
  const double sigma_max = sigma.size() > 0 ? sigma[0] : 0.0;
  if (sigma_max == 0.0)
    throw numeric_error("degenerate model: V has all-zero singular values");
  const double cutoff = std::max(V.rows(), V.cols()) *
                        std::numeric_limits<double>::epsilon() * sigma_max;
  Eigen::VectorXd inv_sigma = Eigen::VectorXd::Zero(sigma.size());
  for (int i = 0; i < sigma.size(); ++i) {
    if (ridge > 0.0)
      inv_sigma[i] = sigma[i] / (sigma[i] * sigma[i] + ridge);
    else if (sigma[i] > cutoff)
      inv_sigma[i] = 1.0 / sigma[i];
  }
  // pinv(V) = Y diag(1/sigma) U^T, so pinv(V^T) = U diag(1/sigma) Y^T.
  return svd.matrixU() * inv_sigma.asDiagonal() * svd.matrixV().transpose();
}

}  // namespace detail

// v = a (V^T)^+, the minimum-norm least-squares solution of
// min_v ||a - v V^T||. Uses the cached pseudo-inverse when present.
inline NovelEmbedding infer_embedding(const EmbeddingModel& model,
                                      const SimilarityVector& sv,
                                      double ridge = 0.0) {
  if (sv.n() != model.n())
    throw data_error("similarity vector length " + std::to_string(sv.n()) +
                     " != model class count " + std::to_string(model.n()));
  NovelEmbedding out;
  if (model.pinv_cache && ridge == 0.0)
    out.v = (sv.a.transpose() * (*model.pinv_cache)).transpose();
  else
    out.v =
        (sv.a.transpose() * detail::pinv_vt(model.V, ridge)).transpose();
  out.residual = oos_objective(out.v, sv.a, model.V);
  return out;
}

// w_trans = v T
inline Eigen::VectorXd transfer_weights(const NovelEmbedding& emb,
                                        const EmbeddingModel& model) {
  if (emb.v.size() != model.q())
    throw data_error("embedding length " + std::to_string(emb.v.size()) +
                     " != model q=" + std::to_string(model.q()));
  return (emb.v.transpose() * model.T).transpose();
}

// Caches pinv(V^T) so each later inference is a single n x q product.
inline EmbeddingModel precompute_solver(EmbeddingModel model) {
  model.pinv_cache = detail::pinv_vt(model.V);
  return model;
}

}  // namespace vager
