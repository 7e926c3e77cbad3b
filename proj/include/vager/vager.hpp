#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vager/errors.hpp"
#include "vager/graph.hpp"
#include "vager/rng.hpp"

namespace vager {

// One-vs-rest classifier weights of all base classes, row per class in
// class-id order. Last column is the bias (features are augmented with 1).
struct BaseWeights {
  std::vector<std::int64_t> class_ids;
  Eigen::MatrixXd W;  // n x p

  int n() const { return static_cast<int>(W.rows()); }
  int p() const { return static_cast<int>(W.cols()); }
};

struct VagerTrainConfig {
  int q = 0;  // 0: pick min(n-1, 32, p) at train time
  double beta = 1.0;
  int max_outer_iters = 500;
  int inner_steps_V = 5;
  int inner_steps_T = 5;
  double step_size = 1e-2;
  double rel_tol = 1e-6;
  double init_scale = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (beta < 0.0) throw data_error("beta must be >= 0");
    if (max_outer_iters < 1) throw data_error("max_outer_iters must be >= 1");
    if (inner_steps_V < 1 || inner_steps_T < 1)
      throw data_error("inner step counts must be >= 1");
    if (step_size <= 0.0) throw data_error("step_size must be > 0");
    if (rel_tol <= 0.0) throw data_error("rel_tol must be > 0");
    if (init_scale <= 0.0) throw data_error("init_scale must be > 0");
  }
};

// Learned embeddings V (n x q) and linear map T (q x p), together with the
// training inputs needed to recompute the loss and the solver cache for
// out-of-sample inference.
struct EmbeddingModel {
  std::vector<std::int64_t> class_ids;
  Eigen::MatrixXd V;  // n x q
  Eigen::MatrixXd T;  // q x p
  double beta = 1.0;
  Eigen::MatrixXd W;  // n x p, base weights the model was fit to
  Eigen::MatrixXd A;  // n x n, analogy graph the model was fit to
  double final_loss = 0.0;
  int outer_iters = 0;
  std::vector<double> loss_trace;
  // Precomputed pseudo-inverse of V^T (n x q); see precompute_solver.
  std::optional<Eigen::MatrixXd> pinv_cache;

  int n() const { return static_cast<int>(V.rows()); }
  int q() const { return static_cast<int>(V.cols()); }
  int p() const { return static_cast<int>(T.cols()); }
};

namespace detail {
inline void check_vager_shapes(const Eigen::MatrixXd& V,
                               const Eigen::MatrixXd& T,
                               const Eigen::MatrixXd& W,
                               const Eigen::MatrixXd& A) {
  if (V.rows() != W.rows() || V.cols() != T.rows() || T.cols() != W.cols() ||
      A.rows() != A.cols() || A.rows() != V.rows())
    throw data_error("vager shape mismatch: V " + std::to_string(V.rows()) +
                     "x" + std::to_string(V.cols()) + ", T " +
                     std::to_string(T.rows()) + "x" + std::to_string(T.cols()) +
                     ", W " + std::to_string(W.rows()) + "x" +
                     std::to_string(W.cols()) + ", A " +
                     std::to_string(A.rows()) + "x" + std::to_string(A.cols()));
}
}  // namespace detail

// ||VT - W||_F^2 + beta * ||A - V V^T||_F^2
inline double vager_loss(const Eigen::MatrixXd& V, const Eigen::MatrixXd& T,
                         const Eigen::MatrixXd& W, const Eigen::MatrixXd& A,
                         double beta) {
  detail::check_vager_shapes(V, T, W, A);
  const double fit = (V * T - W).squaredNorm();
  const double graph = (A - V * V.transpose()).squaredNorm();
  return fit + beta * graph;
}

struct VagerGradients {
  Eigen::MatrixXd dV;  // n x q
  Eigen::MatrixXd dT;  // q x p
};

// dV = 2(VT - W)T^T + beta(-4AV + 4 V V^T V); dT = 2 V^T (VT - W)
inline VagerGradients vager_gradients(const Eigen::MatrixXd& V,
                                      const Eigen::MatrixXd& T,
                                      const Eigen::MatrixXd& W,
                                      const Eigen::MatrixXd& A, double beta) {
  detail::check_vager_shapes(V, T, W, A);
  const Eigen::MatrixXd resid = V * T - W;
  VagerGradients g;
  g.dV = 2.0 * resid * T.transpose() +
         beta * (-4.0 * A * V + 4.0 * V * (V.transpose() * V));
  g.dT = 2.0 * V.transpose() * resid;
  return g;
}

namespace detail {

// One backtracking gradient step on X in place. Halves the step until the
// loss does not increase; leaves X unchanged if no step succeeds.
template <typename LossFn>
double backtracking_step(Eigen::MatrixXd& X, const Eigen::MatrixXd& grad,
                         double loss0, double step0, const LossFn& loss_at) {
  double step = step0;
  while (step > 1e-18) {
    Eigen::MatrixXd cand = X - step * grad;
    const double l = loss_at(cand);
    if (std::isfinite(l) && l <= loss0) {
      X.swap(cand);
      return l;
    }
    step *= 0.5;
  }
  return loss0;
}

}  // namespace detail

// Alternating coordinate descent on V and T with backtracking line search.
// Seeded Gaussian init; stops on relative loss decrease < rel_tol across an
// outer iteration or at max_outer_iters. Loss trace is non-increasing.
inline EmbeddingModel train_vager(const BaseWeights& weights,
                                  const AnalogyGraph& graph,
                                  const VagerTrainConfig& cfg) {
  cfg.validate();
  const int n = weights.n();
  const int p = weights.p();
  if (n < 2) throw data_error("need at least 2 base classes");
  if (graph.n() != n) throw data_error("graph/weights class count mismatch");
  if (graph.class_ids != weights.class_ids)
    throw data_error("graph/weights class id order mismatch");
  int q = cfg.q;
  if (q == 0) q = std::min({n - 1, 32, p});
  if (q < 1 || q > p)
    throw data_error("q=" + std::to_string(q) + " must be in [1, p=" +
                     std::to_string(p) + "]");

  EmbeddingModel model;
  model.class_ids = weights.class_ids;
  model.beta = cfg.beta;
  model.W = weights.W;
  model.A = graph.A;
  model.V.resize(n, q);
  model.T.resize(q, p);
  Rng rng(derive_seed(cfg.seed, 0xE2BEDull));
  const double scale = cfg.init_scale / std::sqrt(static_cast<double>(q));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < q; ++j) model.V(i, j) = scale * rng.next_gaussian();
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < p; ++j) model.T(i, j) = scale * rng.next_gaussian();

  double loss = vager_loss(model.V, model.T, model.W, model.A, cfg.beta);
  if (!std::isfinite(loss))
    throw numeric_error("non-finite loss at initialization");
  model.loss_trace.push_back(loss);

  for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
    const double loss_before = loss;

    for (int s = 0; s < cfg.inner_steps_V; ++s) {
      const auto g = vager_gradients(model.V, model.T, model.W, model.A,
                                     cfg.beta);
      loss = detail::backtracking_step(
          model.V, g.dV, loss, cfg.step_size, [&](const Eigen::MatrixXd& V) {
            return vager_loss(V, model.T, model.W, model.A, cfg.beta);
          });
    }
    for (int s = 0; s < cfg.inner_steps_T; ++s) {
      const auto g = vager_gradients(model.V, model.T, model.W, model.A,
                                     cfg.beta);
      loss = detail::backtracking_step(
          model.T, g.dT, loss, cfg.step_size, [&](const Eigen::MatrixXd& T) {
            return vager_loss(model.V, T, model.W, model.A, cfg.beta);
          });
    }

    if (!std::isfinite(loss))
      throw numeric_error("non-finite loss at outer iteration " +
                          std::to_string(outer));
    model.loss_trace.push_back(loss);
    model.outer_iters = outer + 1;
    const double denom = std::max(std::abs(loss_before), 1e-300);
    if ((loss_before - loss) / denom < cfg.rel_tol) break;
  }
  model.final_loss = loss;
  return model;
}

}  // namespace vager
