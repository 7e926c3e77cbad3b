#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vager/errors.hpp"
#include "vager/features.hpp"
#include "vager/rng.hpp"
#include "vager/vager.hpp"

namespace vager {

enum class Provenance { base, transferred, model, fused };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::base: return "base";
    case Provenance::transferred: return "transferred";
    case Provenance::model: return "model";
    case Provenance::fused: return "fused";
  }
  return "?";
}

inline Provenance provenance_from_string(const std::string& s) {
  if (s == "base") return Provenance::base;
  if (s == "transferred") return Provenance::transferred;
  if (s == "model") return Provenance::model;
  if (s == "fused") return Provenance::fused;
  throw data_error("unknown provenance '" + s + "'");
}

// Binary linear classifier with the bias folded in: w has length d+1 and
// scores sigmoid(w . [x; 1]).
struct LinearClassifier {
  Eigen::VectorXd w;
  std::int64_t class_id = -1;
  Provenance provenance = Provenance::model;

  int p() const { return static_cast<int>(w.size()); }
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit_score(const LinearClassifier& c, const Eigen::VectorXd& x) {
  if (x.size() + 1 != c.w.size())
    throw data_error("classifier expects d=" + std::to_string(c.w.size() - 1) +
                     ", got x of length " + std::to_string(x.size()));
  return c.w.head(x.size()).dot(x) + c.w[c.w.size() - 1];
}

inline double predict(const LinearClassifier& c, const Eigen::VectorXd& x) {
  return sigmoid(logit_score(c, x));
}

struct TrainLRConfig {
  double lambda_reg = 1e-3;
  int epochs = 200;
  int batch_size = 32;
  double step_size = 0.1;  // decays as step_size / sqrt(epoch)
  std::uint64_t seed = 0;
  int neg_per_pos = 20;
  // Full-batch mode with backtracking line search; gives a non-increasing
  // loss trace at the cost of speed. Off by default.
  bool full_batch_backtracking = false;
  // When set, receives the per-epoch loss trace (full-batch mode only).
  std::vector<double>* trace_out = nullptr;

  void validate() const {
    if (lambda_reg < 0.0) throw data_error("lambda_reg must be >= 0");
    if (epochs < 0) throw data_error("epochs must be >= 0");
    if (batch_size < 1) throw data_error("batch_size must be >= 1");
    if (step_size <= 0.0) throw data_error("step_size must be > 0");
    if (neg_per_pos < 1) throw data_error("neg_per_pos must be >= 1");
  }
};

namespace detail {

// Rows of X are augmented samples [x; 1]; y in {0, 1}.
struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

inline Design make_design(const FeatureSet& pos, const FeatureSet& neg) {
  if (pos.records.empty() || neg.records.empty())
    throw data_error("need at least one positive and one negative sample");
  if (pos.d != neg.d) throw data_error("positive/negative dimension mismatch");
  const int d = pos.d;
  const std::size_t n = pos.records.size() + neg.records.size();
  Design ds;
  ds.X.resize(static_cast<int>(n), d + 1);
  ds.y.resize(static_cast<int>(n));
  int row = 0;
  for (const auto& r : pos.records) {
    ds.X.row(row).head(d) = r.x.transpose();
    ds.X(row, d) = 1.0;
    ds.y[row] = 1.0;
    ++row;
  }
  for (const auto& r : neg.records) {
    ds.X.row(row).head(d) = r.x.transpose();
    ds.X(row, d) = 1.0;
    ds.y[row] = 0.0;
    ++row;
  }
  return ds;
}

inline double cross_entropy_sum(const Eigen::VectorXd& w,
                                const Eigen::MatrixXd& X,
                                const Eigen::VectorXd& y) {
  double total = 0.0;
  for (int i = 0; i < X.rows(); ++i) {
    const double z = X.row(i).dot(w);
    // -log sigma(z) = log(1 + e^-z), computed stably
    const double log1p_exp =
        z > 0.0 ? std::log1p(std::exp(-z)) + 0.0 : std::log1p(std::exp(z)) - z;
    total += y[i] > 0.5 ? log1p_exp : log1p_exp + z;
  }
  return total;
}

inline Eigen::VectorXd cross_entropy_grad_sum(const Eigen::VectorXd& w,
                                              const Eigen::MatrixXd& X,
                                              const Eigen::VectorXd& y) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
  for (int i = 0; i < X.rows(); ++i)
    g += (sigmoid(X.row(i).dot(w)) - y[i]) * X.row(i).transpose();
  return g;
}

}  // namespace detail

// Sum of cross-entropy terms plus lambda * ||w||^2.
inline double logistic_loss(const Eigen::VectorXd& w, const Eigen::MatrixXd& X,
                            const Eigen::VectorXd& y, double lambda_reg) {
  return detail::cross_entropy_sum(w, X, y) + lambda_reg * w.squaredNorm();
}

inline Eigen::VectorXd logistic_gradient(const Eigen::VectorXd& w,
                                         const Eigen::MatrixXd& X,
                                         const Eigen::VectorXd& y,
                                         double lambda_reg) {
  return detail::cross_entropy_grad_sum(w, X, y) + 2.0 * lambda_reg * w;
}

// Sum of cross-entropy terms plus lambda * ||w - anchor||^2.
inline double tuning_loss(const Eigen::VectorXd& w, const Eigen::MatrixXd& X,
                          const Eigen::VectorXd& y, double lambda,
                          const Eigen::VectorXd& anchor) {
  return detail::cross_entropy_sum(w, X, y) +
         lambda * (w - anchor).squaredNorm();
}

inline Eigen::VectorXd tuning_gradient(const Eigen::VectorXd& w,
                                       const Eigen::MatrixXd& X,
                                       const Eigen::VectorXd& y, double lambda,
                                       const Eigen::VectorXd& anchor) {
  return detail::cross_entropy_grad_sum(w, X, y) + 2.0 * lambda * (w - anchor);
}

namespace detail {

// Minibatch SGD on mean cross-entropy with the quadratic penalty
// lambda * ||w - anchor||^2 (anchor = 0 gives plain L2) applied as an exact
// proximal step, which stays stable for arbitrarily large lambda.
inline Eigen::VectorXd sgd_quadratic_penalty(const Design& ds,
                                             Eigen::VectorXd w, double lambda,
                                             const Eigen::VectorXd& anchor,
                                             const TrainLRConfig& cfg) {
  const int n = static_cast<int>(ds.X.rows());
  const double lam = lambda / n;  // mean-scaled objective, same minimizer
  Rng rng(derive_seed(cfg.seed, 0x59DULL));

  if (cfg.full_batch_backtracking) {
    const auto loss_at = [&](const Eigen::VectorXd& v) {
      return (cross_entropy_sum(v, ds.X, ds.y) +
              lambda * (v - anchor).squaredNorm()) /
             n;
    };
    double loss = loss_at(w);
    if (cfg.trace_out) cfg.trace_out->push_back(loss);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      const Eigen::VectorXd g =
          (cross_entropy_grad_sum(w, ds.X, ds.y) +
           2.0 * lambda * (w - anchor)) /
          n;
      double step = cfg.step_size;
      while (step > 1e-18) {
        Eigen::VectorXd cand = w - step * g;
        const double l = loss_at(cand);
        if (std::isfinite(l) && l <= loss) {
          w = std::move(cand);
          loss = l;
          break;
        }
        step *= 0.5;
      }
      if (cfg.trace_out) cfg.trace_out->push_back(loss);
    }
    if (!w.allFinite()) throw numeric_error("non-finite weights in training");
    return w;
  }

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double eta = cfg.step_size / std::sqrt(static_cast<double>(epoch));
    const auto order = rng.permutation(static_cast<std::size_t>(n));
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int end = std::min(start + cfg.batch_size, n);
      Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
      for (int i = start; i < end; ++i) {
        const auto row = static_cast<int>(order[i]);
        g += (sigmoid(ds.X.row(row).dot(w)) - ds.y[row]) *
             ds.X.row(row).transpose();
      }
      g /= static_cast<double>(end - start);
      w -= eta * g;
      if (lam > 0.0) w = (w + 2.0 * eta * lam * anchor) / (1.0 + 2.0 * eta * lam);
    }
    if (!w.allFinite())
      throw numeric_error("non-finite weights at epoch " +
                          std::to_string(epoch));
  }
  return w;
}

}  // namespace detail

// Seeded minibatch SGD minimizing sum CE + lambda_reg ||w||^2, from init
// (zero vector if absent).
inline LinearClassifier train_logistic(
    const FeatureSet& pos, const FeatureSet& neg, const TrainLRConfig& cfg,
    const std::optional<Eigen::VectorXd>& init = std::nullopt,
    std::int64_t class_id = -1) {
  cfg.validate();
  const auto ds = detail::make_design(pos, neg);
  Eigen::VectorXd w =
      init ? *init : Eigen::VectorXd::Zero(pos.d + 1).eval();
  if (w.size() != pos.d + 1)
    throw data_error("init vector length " + std::to_string(w.size()) +
                     " != p=" + std::to_string(pos.d + 1));
  LinearClassifier c;
  c.class_id = class_id;
  c.provenance = Provenance::model;
  c.w = detail::sgd_quadratic_penalty(ds, std::move(w), cfg.lambda_reg,
                                      Eigen::VectorXd::Zero(pos.d + 1), cfg);
  return c;
}

// One-vs-rest base classifiers; negatives are a seeded draw from the other
// classes' pool, neg_per_pos per positive (capped by pool size).
inline BaseWeights train_base_classifiers(const FeatureSet& base,
                                          const TrainLRConfig& cfg) {
  cfg.validate();
  const auto ids = base.class_ids();
  if (ids.size() < 2) throw data_error("need at least 2 base classes");
  BaseWeights bw;
  bw.class_ids = ids;
  bw.W.resize(static_cast<int>(ids.size()), base.d + 1);
  for (std::size_t ci = 0; ci < ids.size(); ++ci) {
    const auto pos_idx = base.class_records(ids[ci]);
    if (pos_idx.empty())
      throw data_error("class " + std::to_string(ids[ci]) + " is empty");
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < base.records.size(); ++i)
      if (base.records[i].class_id != ids[ci]) pool.push_back(i);
    const std::size_t want =
        std::min(pool.size(), pos_idx.size() * static_cast<std::size_t>(
                                                   cfg.neg_per_pos));
    Rng rng(derive_seed(cfg.seed, 0xBA5Eull + ci));
    const auto picks = rng.sample_without_replacement(pool.size(), want);
    std::vector<std::size_t> neg_idx;
    neg_idx.reserve(want);
    for (auto k : picks) neg_idx.push_back(pool[k]);

    TrainLRConfig per_class = cfg;
    per_class.seed = derive_seed(cfg.seed, 0x0B5ull + ci);
    const auto c = train_logistic(base.subset(pos_idx), base.subset(neg_idx),
                                  per_class, std::nullopt, ids[ci]);
    bw.W.row(static_cast<int>(ci)) = c.w.transpose();
  }
  return bw;
}

// Refinement: retrain from the transferred parameters as the starting point.
inline LinearClassifier fuse_initializing(const LinearClassifier& w_trans,
                                          const FeatureSet& pos,
                                          const FeatureSet& neg,
                                          const TrainLRConfig& cfg) {
  auto c = train_logistic(pos, neg, cfg, w_trans.w, w_trans.class_id);
  c.provenance = Provenance::fused;
  return c;
}

// Refinement: random init, penalty pulling toward the transferred
// parameters, sum CE + lambda ||w - w_trans||^2.
inline LinearClassifier fuse_tuning(const LinearClassifier& w_trans,
                                    const FeatureSet& pos,
                                    const FeatureSet& neg, double lambda,
                                    const TrainLRConfig& cfg) {
  cfg.validate();
  if (lambda < 0.0) throw data_error("tuning lambda must be >= 0");
  const auto ds = detail::make_design(pos, neg);
  Rng rng(derive_seed(cfg.seed, 0x747ull));
  Eigen::VectorXd w(pos.d + 1);
  for (int i = 0; i < w.size(); ++i) w[i] = 0.01 * rng.next_gaussian();
  LinearClassifier c;
  c.class_id = w_trans.class_id;
  c.provenance = Provenance::fused;
  c.w = detail::sgd_quadratic_penalty(ds, std::move(w), lambda, w_trans.w, cfg);
  return c;
}

// Refinement: w = w_trans + lambda * w_model.
inline LinearClassifier fuse_voting(const LinearClassifier& w_trans,
                                    const LinearClassifier& w_model,
                                    double lambda) {
  if (w_trans.p() != w_model.p())
    throw data_error("voting dimension mismatch: " +
                     std::to_string(w_trans.p()) + " vs " +
                     std::to_string(w_model.p()));
  LinearClassifier c;
  c.class_id = w_trans.class_id;
  c.provenance = Provenance::fused;
  c.w = w_trans.w + lambda * w_model.w;
  return c;
}

// Weighted-LR baseline: weighted average of the 10 most similar base
// classifiers, weights = L2-normalized cosine similarities.
inline LinearClassifier weighted_lr_baseline(const BaseWeights& weights,
                                             const ClassMeans& means,
                                             const Eigen::VectorXd& novel_mean,
                                             std::int64_t class_id = -1,
                                             int top = 10) {
  if (means.n() != weights.n())
    throw data_error("means/weights class count mismatch");
  const double novel_norm = novel_mean.norm();
  if (novel_norm == 0.0) throw data_error("novel mean is the zero vector");
  std::vector<std::pair<double, int>> sims;  // (-sim, row) for sort order
  for (int i = 0; i < means.n(); ++i) {
    const double norm_i = means.M.row(i).norm();
    if (norm_i == 0.0)
      throw data_error("class " + std::to_string(means.class_ids[i]) +
                       " has zero-norm mean");
    sims.emplace_back(means.M.row(i).dot(novel_mean) / (norm_i * novel_norm),
                      i);
  }
  std::stable_sort(sims.begin(), sims.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return means.class_ids[a.second] < means.class_ids[b.second];
  });
  const int take = std::min<int>(top, means.n());
  double norm_sq = 0.0;
  for (int i = 0; i < take; ++i) norm_sq += sims[i].first * sims[i].first;
  if (norm_sq == 0.0)
    throw numeric_error("selected similarities are all zero");
  const double scale = 1.0 / std::sqrt(norm_sq);
  LinearClassifier c;
  c.class_id = class_id;
  c.provenance = Provenance::transferred;
  c.w = Eigen::VectorXd::Zero(weights.p());
  for (int i = 0; i < take; ++i)
    c.w += (sims[i].first * scale) * weights.W.row(sims[i].second).transpose();
  return c;
}

// One-vs-rest argmax over logits; ties go to the lower class id.
inline std::int64_t multiclass_decide(
    const std::vector<LinearClassifier>& classifiers,
    const Eigen::VectorXd& x) {
  if (classifiers.size() < 2)
    throw data_error("need at least 2 classifiers for a multiclass decision");
  std::int64_t best_id = 0;
  double best = 0.0;
  bool first = true;
  for (const auto& c : classifiers) {
    const double z = logit_score(c, x);
    if (first || z > best || (z == best && c.class_id < best_id)) {
      best = z;
      best_id = c.class_id;
      first = false;
    }
  }
  return best_id;
}

// Softmax regression over several classes, used by the multiclass LR
// baseline. Returns one linear scorer per class (class order ascending).
inline std::vector<LinearClassifier> train_softmax(
    const std::vector<FeatureSet>& per_class,
    const std::vector<std::int64_t>& class_ids, const TrainLRConfig& cfg) {
  cfg.validate();
  if (per_class.size() < 2 || per_class.size() != class_ids.size())
    throw data_error("softmax needs >= 2 classes with matching ids");
  const int d = per_class[0].d;
  const int m = static_cast<int>(per_class.size());
  std::vector<std::pair<int, const FeatureRecord*>> samples;
  for (int k = 0; k < m; ++k) {
    if (per_class[k].d != d) throw data_error("dimension mismatch");
    if (per_class[k].records.empty())
      throw data_error("class " + std::to_string(class_ids[k]) + " is empty");
    for (const auto& r : per_class[k].records) samples.emplace_back(k, &r);
  }
  const int n = static_cast<int>(samples.size());
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(m, d + 1);
  const double lam = cfg.lambda_reg / n;
  Rng rng(derive_seed(cfg.seed, 0x50F7ull));
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double eta = cfg.step_size / std::sqrt(static_cast<double>(epoch));
    const auto order = rng.permutation(static_cast<std::size_t>(n));
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int end = std::min(start + cfg.batch_size, n);
      Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, d + 1);
      for (int i = start; i < end; ++i) {
        const auto& [label, rec] = samples[order[i]];
        Eigen::VectorXd xt(d + 1);
        xt.head(d) = rec->x;
        xt[d] = 1.0;
        Eigen::VectorXd z = W * xt;
        const double zmax = z.maxCoeff();
        Eigen::VectorXd probs = (z.array() - zmax).exp();
        probs /= probs.sum();
        probs[label] -= 1.0;
        G += probs * xt.transpose();
      }
      G /= static_cast<double>(end - start);
      W = (W - eta * G) / (1.0 + 2.0 * eta * lam);
    }
    if (!W.allFinite())
      throw numeric_error("non-finite softmax weights at epoch " +
                          std::to_string(epoch));
  }
  std::vector<LinearClassifier> out(m);
  for (int k = 0; k < m; ++k) {
    out[k].class_id = class_ids[k];
    out[k].provenance = Provenance::model;
    out[k].w = W.row(k).transpose();
  }
  return out;
}

}  // namespace vager
