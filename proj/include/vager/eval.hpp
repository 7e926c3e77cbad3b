#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vager/classify.hpp"
#include "vager/errors.hpp"
#include "vager/features.hpp"
#include "vager/graph.hpp"
#include "vager/rng.hpp"
#include "vager/transfer.hpp"
#include "vager/vager.hpp"

namespace vager {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// Mann-Whitney AUC: P(pos score > neg score), ties counted half.
inline double roc_auc(const std::vector<double>& pos_scores,
                      const std::vector<double>& neg_scores) {
  if (pos_scores.empty() || neg_scores.empty())
    throw data_error("roc_auc needs non-empty score lists");
  // Rank-sum formulation; equals pair counting exactly, including ties.
  struct Entry {
    double s;
    bool pos;
  };
  std::vector<Entry> all;
  all.reserve(pos_scores.size() + neg_scores.size());
  for (double s : pos_scores) all.push_back({s, true});
  for (double s : neg_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.s < b.s; });
  double wins = 0.0;
  std::size_t i = 0;
  double negs_below = 0.0;
  while (i < all.size()) {
    std::size_t j = i;
    int tie_pos = 0, tie_neg = 0;
    while (j < all.size() && all[j].s == all[i].s) {
      (all[j].pos ? tie_pos : tie_neg)++;
      ++j;
    }
    wins += tie_pos * (negs_below + 0.5 * tie_neg);
    negs_below += tie_neg;
    i = j;
  }
  return wins / (static_cast<double>(pos_scores.size()) *
                 static_cast<double>(neg_scores.size()));
}

// FPR/TPR pairs swept over all score thresholds, for CSV export.
inline std::vector<std::pair<double, double>> roc_curve(
    const std::vector<double>& pos_scores,
    const std::vector<double>& neg_scores) {
  if (pos_scores.empty() || neg_scores.empty())
    throw data_error("roc_curve needs non-empty score lists");
  struct Entry {
    double s;
    bool pos;
  };
  std::vector<Entry> all;
  for (double s : pos_scores) all.push_back({s, true});
  for (double s : neg_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const Entry& a, const Entry& b) { return a.s > b.s; });
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  double tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].s == all[i].s) {
      (all[j].pos ? tp : fp) += 1;
      ++j;
    }
    pts.emplace_back(fp / neg_scores.size(), tp / pos_scores.size());
    i = j;
  }
  return pts;
}

// F1 at a fixed probability threshold; 0 by convention when no positive
// prediction or no true positive exists.
inline double f1_score(const std::vector<double>& scores,
                       const std::vector<bool>& labels,
                       double threshold = 0.5) {
  if (scores.size() != labels.size())
    throw data_error("f1_score length mismatch");
  if (scores.empty()) throw data_error("f1_score needs non-empty input");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && labels[i]) ++tp;
    else if (pred && !labels[i]) ++fp;
    else if (!pred && labels[i]) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = tp / (tp + fp);
  const double recall = tp / (tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

// Macro top-1: per-class accuracy averaged over classes. micro=true gives
// the plain fraction of matches instead.
inline double top1_accuracy(const std::vector<std::int64_t>& predictions,
                            const std::vector<std::int64_t>& truths,
                            bool micro = false) {
  if (predictions.size() != truths.size() || predictions.empty())
    throw data_error("top1_accuracy length mismatch or empty");
  if (micro) {
    double hits = 0;
    for (std::size_t i = 0; i < truths.size(); ++i)
      if (predictions[i] == truths[i]) ++hits;
    return hits / predictions.size();
  }
  std::map<std::int64_t, std::pair<double, double>> per_class;  // hits, total
  for (std::size_t i = 0; i < truths.size(); ++i) {
    auto& [hits, total] = per_class[truths[i]];
    total += 1;
    if (predictions[i] == truths[i]) hits += 1;
  }
  double acc = 0.0;
  for (const auto& [cid, ht] : per_class) acc += ht.first / ht.second;
  return acc / per_class.size();
}

// ---------------------------------------------------------------------------
// SR-vs-improvement regression
// ---------------------------------------------------------------------------

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double pearson_r = 0.0;
  double r_squared = 0.0;
  std::pair<double, double> ci95_slope{0.0, 0.0};
  int n_points = 0;
};

// OLS of improvement on SR with the 95% slope CI from the t distribution.
inline RegressionResult sr_improvement_regression(
    const std::vector<std::pair<double, double>>& points) {
  const int n = static_cast<int>(points.size());
  if (n < 3) throw data_error("regression needs at least 3 points");
  double sx = 0, sy = 0;
  for (const auto& [x, y] : points) {
    sx += x;
    sy += y;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0) throw data_error("regression: SR variance is zero");
  RegressionResult r;
  r.n_points = n;
  r.slope = sxy / sxx;
  r.intercept = my - r.slope * mx;
  r.pearson_r = syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
  r.r_squared = r.pearson_r * r.pearson_r;
  const double sse = syy - r.slope * sxy;
  const double se =
      std::sqrt(std::max(sse, 0.0) / (n - 2) / sxx);
  const boost::math::students_t dist(n - 2);
  const double t = boost::math::quantile(dist, 0.975);
  r.ci95_slope = {r.slope - t * se, r.slope + t * se};
  return r;
}

// ---------------------------------------------------------------------------
// Experiment protocols
// ---------------------------------------------------------------------------

struct TrialResult {
  int trial = 0;
  std::uint64_t trial_seed = 0;
  std::string method;
  std::map<std::string, double> metrics;
};

struct EvalReport {
  std::vector<TrialResult> per_trial;
  // method -> metric -> (mean, sample std)
  std::map<std::string, std::map<std::string, std::pair<double, double>>>
      aggregates;
  std::map<std::string, std::string> metadata;

  void finalize() {
    std::map<std::string, std::map<std::string, std::vector<double>>> buckets;
    for (const auto& t : per_trial)
      for (const auto& [name, value] : t.metrics)
        buckets[t.method][name].push_back(value);
    aggregates.clear();
    for (const auto& [method, metrics] : buckets)
      for (const auto& [name, values] : metrics) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= values.size();
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        const double sd =
            values.size() > 1 ? std::sqrt(var / (values.size() - 1)) : 0.0;
        aggregates[method][name] = {mean, sd};
      }
  }
};

inline const std::vector<std::string>& all_binary_methods() {
  static const std::vector<std::string> methods = {
      "VAGER",        "VAGER+Initializing", "VAGER+Tuning",
      "VAGER+Voting", "LR",                 "Weighted-LR"};
  return methods;
}

struct ExperimentConfig {
  std::vector<std::string> methods = all_binary_methods();
  int k = 1;
  int trials = 50;
  int test_neg_per_class = 5;  // binary protocol
  int test_per_class = 5;      // multiway protocol
  int m = 5;
  double voting_lambda = 1.0;
  double tuning_lambda = 1.0;
  bool micro_top1 = false;
  TrainLRConfig lr;
  std::uint64_t seed = 0;
};

namespace detail {

inline Eigen::VectorXd mean_vector(const FeatureSet& fs) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(fs.d);
  for (const auto& r : fs.records) m += r.x;
  return m / static_cast<double>(fs.records.size());
}

struct TrialClassifiers {
  LinearClassifier w_trans;
  LinearClassifier w_model;
};

// Transferred weights for one novel class given its k-shot mean.
inline LinearClassifier make_transferred(const EmbeddingModel& model,
                                         const ClassMeans& means,
                                         const Eigen::VectorXd& novel_mean,
                                         std::int64_t class_id) {
  const auto a = novel_similarity(means, novel_mean);
  const auto emb = infer_embedding(model, a);
  LinearClassifier c;
  c.class_id = class_id;
  c.provenance = Provenance::transferred;
  c.w = transfer_weights(emb, model);
  return c;
}

// Seeded negative draw from the base pool, excluding the given records.
inline FeatureSet sample_negatives(const FeatureSet& base,
                                   const std::set<std::size_t>& excluded,
                                   std::size_t want, std::uint64_t seed) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < base.records.size(); ++i)
    if (!excluded.count(i)) pool.push_back(i);
  if (pool.empty()) throw data_error("empty negative pool");
  want = std::min(want, pool.size());
  Rng rng(seed);
  const auto picks = rng.sample_without_replacement(pool.size(), want);
  std::vector<std::size_t> idx;
  idx.reserve(want);
  for (auto k : picks) idx.push_back(pool[k]);
  return base.subset(idx);
}

// Fixed-count per-base-class test negatives, seeded.
inline std::vector<std::size_t> sample_test_negative_indices(
    const FeatureSet& base, int per_class, std::uint64_t seed) {
  std::vector<std::size_t> out;
  const auto ids = base.class_ids();
  for (std::size_t ci = 0; ci < ids.size(); ++ci) {
    const auto cls = base.class_records(ids[ci]);
    const std::size_t want =
        std::min(cls.size(), static_cast<std::size_t>(per_class));
    Rng rng(derive_seed(seed, ci));
    for (auto k : rng.sample_without_replacement(cls.size(), want))
      out.push_back(cls[k]);
  }
  return out;
}

inline LinearClassifier build_method_classifier(
    const std::string& method, const LinearClassifier& w_trans,
    const LinearClassifier& w_model, const FeatureSet& train_pos,
    const FeatureSet& train_neg, const BaseWeights& base_weights,
    const ClassMeans& means, const Eigen::VectorXd& novel_mean,
    const ExperimentConfig& cfg, const TrainLRConfig& lr) {
  if (method == "VAGER") return w_trans;
  if (method == "LR") return w_model;
  if (method == "VAGER+Voting")
    return fuse_voting(w_trans, w_model, cfg.voting_lambda);
  if (method == "VAGER+Initializing")
    return fuse_initializing(w_trans, train_pos, train_neg, lr);
  if (method == "VAGER+Tuning")
    return fuse_tuning(w_trans, train_pos, train_neg, cfg.tuning_lambda, lr);
  if (method == "Weighted-LR")
    return weighted_lr_baseline(base_weights, means, novel_mean,
                                w_trans.class_id);
  throw data_error("unknown method '" + method + "'");
}

}  // namespace detail

// k-shot binary protocol for one novel class: per trial, a seeded k-shot
// split, base-pool negatives, every requested method scored with AUC and F1.
// Per-trial seeds derive from the master seed by the splitmix stream.
inline EvalReport run_binary_experiment(const FeatureSet& base,
                                        const FeatureSet& novel,
                                        std::int64_t novel_class_id,
                                        const EmbeddingModel& model,
                                        const BaseWeights& base_weights,
                                        const ExperimentConfig& cfg) {
  const auto means = class_means(base);
  EvalReport report;
  report.metadata["protocol"] = "binary";
  report.metadata["k"] = std::to_string(cfg.k);
  report.metadata["trials"] = std::to_string(cfg.trials);
  report.metadata["novel_class"] = std::to_string(novel_class_id);
  report.metadata["seed"] = std::to_string(cfg.seed);

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t trial_seed =
        derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
    auto [train_pos, test_pos] =
        split_kshot(novel, novel_class_id, cfg.k, derive_seed(trial_seed, 1));
    const Eigen::VectorXd novel_mean = detail::mean_vector(train_pos);

    const auto test_neg_idx = detail::sample_test_negative_indices(
        base, cfg.test_neg_per_class, derive_seed(trial_seed, 2));
    const FeatureSet test_neg = base.subset(test_neg_idx);
    const std::set<std::size_t> excluded(test_neg_idx.begin(),
                                         test_neg_idx.end());
    const FeatureSet train_neg = detail::sample_negatives(
        base, excluded,
        static_cast<std::size_t>(cfg.lr.neg_per_pos) * cfg.k,
        derive_seed(trial_seed, 3));

    TrainLRConfig lr = cfg.lr;
    lr.seed = derive_seed(trial_seed, 4);
    const auto w_trans =
        detail::make_transferred(model, means, novel_mean, novel_class_id);
    const auto w_model =
        train_logistic(train_pos, train_neg, lr, std::nullopt, novel_class_id);

    for (const auto& method : cfg.methods) {
      const auto clf = detail::build_method_classifier(
          method, w_trans, w_model, train_pos, train_neg, base_weights, means,
          novel_mean, cfg, lr);
      std::vector<double> pos_scores, neg_scores, all_scores;
      std::vector<bool> labels;
      for (const auto& r : test_pos.records) {
        const double s = predict(clf, r.x);
        pos_scores.push_back(s);
        all_scores.push_back(s);
        labels.push_back(true);
      }
      for (const auto& r : test_neg.records) {
        const double s = predict(clf, r.x);
        neg_scores.push_back(s);
        all_scores.push_back(s);
        labels.push_back(false);
      }
      TrialResult tr;
      tr.trial = trial;
      tr.trial_seed = trial_seed;
      tr.method = method;
      tr.metrics["auc"] = roc_auc(pos_scores, neg_scores);
      tr.metrics["f1"] = f1_score(all_scores, labels);
      report.per_trial.push_back(std::move(tr));
    }
  }
  report.finalize();
  return report;
}

// m-way k-shot protocol: per trial, a seeded choice of m novel classes,
// k-shot training, disjoint test samples, argmax decision, macro top-1.
inline EvalReport run_multiway_experiment(const FeatureSet& base,
                                          const FeatureSet& novel,
                                          const EmbeddingModel& model,
                                          const BaseWeights& base_weights,
                                          const ExperimentConfig& cfg) {
  const auto means = class_means(base);
  const auto novel_ids = novel.class_ids();
  if (static_cast<int>(novel_ids.size()) < cfg.m)
    throw data_error("need >= m novel classes");
  EvalReport report;
  report.metadata["protocol"] = "multiway";
  report.metadata["m"] = std::to_string(cfg.m);
  report.metadata["k"] = std::to_string(cfg.k);
  report.metadata["trials"] = std::to_string(cfg.trials);
  report.metadata["seed"] = std::to_string(cfg.seed);

  for (int trial = 0; trial < cfg.trials; ++trial) {
    const std::uint64_t trial_seed =
        derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
    Rng pick(derive_seed(trial_seed, 1));
    auto chosen_idx = pick.sample_without_replacement(
        novel_ids.size(), static_cast<std::size_t>(cfg.m));
    std::sort(chosen_idx.begin(), chosen_idx.end());
    std::vector<std::int64_t> chosen;
    for (auto i : chosen_idx) chosen.push_back(novel_ids[i]);

    struct PerClass {
      FeatureSet train, test;
      Eigen::VectorXd mean;
      LinearClassifier w_trans, w_model;
    };
    std::vector<PerClass> classes(cfg.m);
    std::vector<FeatureSet> softmax_train;
    for (int c = 0; c < cfg.m; ++c) {
      auto& pc = classes[c];
      auto [train, rest] = split_kshot(novel, chosen[c], cfg.k,
                                       derive_seed(trial_seed, 100 + c));
      pc.train = std::move(train);
      Rng test_rng(derive_seed(trial_seed, 200 + c));
      const std::size_t want = std::min(
          rest.records.size(), static_cast<std::size_t>(cfg.test_per_class));
      std::vector<std::size_t> tidx;
      for (auto i :
           test_rng.sample_without_replacement(rest.records.size(), want))
        tidx.push_back(i);
      pc.test = rest.subset(tidx);
      pc.mean = detail::mean_vector(pc.train);
      pc.w_trans = detail::make_transferred(model, means, pc.mean, chosen[c]);
      TrainLRConfig lr = cfg.lr;
      lr.seed = derive_seed(trial_seed, 300 + c);
      const FeatureSet train_neg = detail::sample_negatives(
          base, {}, static_cast<std::size_t>(cfg.lr.neg_per_pos) * cfg.k,
          derive_seed(trial_seed, 400 + c));
      pc.w_model =
          train_logistic(pc.train, train_neg, lr, std::nullopt, chosen[c]);
      softmax_train.push_back(pc.train);
    }

    for (const auto& method : cfg.methods) {
      std::vector<LinearClassifier> clfs;
      if (method == "LR-Softmax") {
        TrainLRConfig lr = cfg.lr;
        lr.seed = derive_seed(trial_seed, 5);
        clfs = train_softmax(softmax_train, chosen, lr);
      } else {
        for (int c = 0; c < cfg.m; ++c) {
          TrainLRConfig lr = cfg.lr;
          lr.seed = derive_seed(trial_seed, 300 + c);
          const FeatureSet train_neg = detail::sample_negatives(
              base, {}, static_cast<std::size_t>(cfg.lr.neg_per_pos) * cfg.k,
              derive_seed(trial_seed, 400 + c));
          clfs.push_back(detail::build_method_classifier(
              method, classes[c].w_trans, classes[c].w_model, classes[c].train,
              train_neg, base_weights, means, classes[c].mean, cfg, lr));
        }
      }
      std::vector<std::int64_t> predictions, truths;
      for (int c = 0; c < cfg.m; ++c)
        for (const auto& r : classes[c].test.records) {
          predictions.push_back(multiclass_decide(clfs, r.x));
          truths.push_back(chosen[c]);
        }
      TrialResult tr;
      tr.trial = trial;
      tr.trial_seed = trial_seed;
      tr.method = method;
      tr.metrics["top1"] = top1_accuracy(predictions, truths, cfg.micro_top1);
      report.per_trial.push_back(std::move(tr));
    }
  }
  report.finalize();
  return report;
}

}  // namespace vager
