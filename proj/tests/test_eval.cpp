#include <doctest.h>

#include <cmath>

#include "vager/classify.hpp"
#include "vager/eval.hpp"
#include "vager/graph.hpp"
#include "vager/rng.hpp"
#include "vager/synth.hpp"
#include "vager/transfer.hpp"
#include "vager/vager.hpp"

using namespace vager;

namespace {

double brute_force_auc(const std::vector<double>& pos,
                       const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) {
      if (p > n) wins += 1.0;
      else if (p == n) wins += 0.5;
    }
  return wins / (pos.size() * neg.size());
}

}  // namespace

TEST_CASE("roc_auc basics") {
  CHECK(roc_auc({0.9}, {0.1}) == 1.0);
  CHECK(roc_auc({0.1}, {0.9}) == 0.0);
  CHECK(roc_auc({0.8, 0.4}, {0.6, 0.2}) == 0.75);
  CHECK_THROWS_AS(roc_auc({}, {0.5}), data_error);
}

TEST_CASE("roc_auc equals brute-force pair counting on random sets") {
  Rng rng(808);
  for (int rep = 0; rep < 100; ++rep) {
    const int np = 1 + static_cast<int>(rng.next_below(20));
    const int nn = 1 + static_cast<int>(rng.next_below(20));
    std::vector<double> pos(np), neg(nn);
    // quantized scores force ties
    for (auto& s : pos) s = std::floor(rng.next_uniform() * 8) / 8.0;
    for (auto& s : neg) s = std::floor(rng.next_uniform() * 8) / 8.0;
    CHECK(roc_auc(pos, neg) == brute_force_auc(pos, neg));
  }
}

TEST_CASE("roc_auc invariances") {
  Rng rng(33);
  std::vector<double> pos(15), neg(12);
  for (auto& s : pos) s = rng.next_gaussian();
  for (auto& s : neg) s = rng.next_gaussian();
  const double base = roc_auc(pos, neg);

  SUBCASE("strictly increasing transforms leave AUC unchanged") {
    auto tx = [](std::vector<double> v, auto f) {
      for (auto& s : v) s = f(s);
      return v;
    };
    const auto exp_fn = [](double s) { return std::exp(s); };
    const auto affine = [](double s) { return 3.0 * s + 11.0; };
    CHECK(roc_auc(tx(pos, exp_fn), tx(neg, exp_fn)) == doctest::Approx(base));
    CHECK(roc_auc(tx(pos, affine), tx(neg, affine)) == doctest::Approx(base));
  }
  SUBCASE("swap complement identity") {
    CHECK(std::abs(roc_auc(pos, neg) + roc_auc(neg, pos) - 1.0) < 1e-12);
  }
}

TEST_CASE("f1_score") {
  SUBCASE("all correct") {
    CHECK(f1_score({0.9, 0.8, 0.1}, {true, true, false}) == 1.0);
  }
  SUBCASE("no positive predictions gives 0") {
    CHECK(f1_score({0.1, 0.2}, {true, false}) == 0.0);
  }
  SUBCASE("TP=1 FP=1 FN=1 gives 0.5") {
    CHECK(f1_score({0.9, 0.9, 0.1}, {true, false, true}) ==
          doctest::Approx(0.5));
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(f1_score({0.5}, {true, false}), data_error);
  }
}

TEST_CASE("top1_accuracy") {
  CHECK(top1_accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
  CHECK(top1_accuracy({1, 2, 3}, {2, 3, 1}) == 0.0);
  // class A: 2/2, class B: 1/3 -> macro (1 + 1/3)/2
  CHECK(top1_accuracy({1, 1, 2, 5, 5}, {1, 1, 2, 2, 2}) ==
        doctest::Approx((1.0 + 1.0 / 3.0) / 2.0));
  // micro variant: 3/5
  CHECK(top1_accuracy({1, 1, 2, 5, 5}, {1, 1, 2, 2, 2}, true) ==
        doctest::Approx(3.0 / 5.0));
}

TEST_CASE("sr_improvement_regression") {
  SUBCASE("exact line") {
    const auto r = sr_improvement_regression(
        {{1.0, 2.5}, {2.0, 4.5}, {3.0, 6.5}, {4.0, 8.5}});
    CHECK(r.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.intercept == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.r_squared == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("flat response") {
    const auto r =
        sr_improvement_regression({{1.0, 3.0}, {2.0, 3.0}, {5.0, 3.0}});
    CHECK(r.slope == doctest::Approx(0.0));
    CHECK(r.r_squared == doctest::Approx(0.0));
  }
  SUBCASE("matches the closed-form normal-equations oracle") {
    Rng rng(99);
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < 50; ++i)
      pts.emplace_back(rng.next_gaussian(), rng.next_gaussian());
    const auto r = sr_improvement_regression(pts);
    // normal equations on [1 x]
    double s1 = pts.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto& [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double det = s1 * sxx - sx * sx;
    const double slope = (s1 * sxy - sx * sy) / det;
    const double intercept = (sxx * sy - sx * sxy) / det;
    CHECK(std::abs(r.slope - slope) < 1e-10);
    CHECK(std::abs(r.intercept - intercept) < 1e-10);
    CHECK(r.r_squared == doctest::Approx(r.pearson_r * r.pearson_r).epsilon(1e-10));
  }
  SUBCASE("degenerate variance rejected") {
    CHECK_THROWS_AS(
        sr_improvement_regression({{1.0, 2.0}, {1.0, 3.0}, {1.0, 4.0}}),
        data_error);
  }
}

namespace {

struct Bench {
  FeatureSet base, novel;
  BaseWeights bw;
  EmbeddingModel model;
};

Bench small_bench(std::uint64_t seed) {
  auto cfg = default_benchmark_config(seed, 3, 8);
  cfg.d = 6;
  cfg.samples_per_base = 25;
  cfg.samples_per_novel = 25;
  const auto data = generate_synthetic(cfg);
  Bench b;
  b.base = data.base;
  b.novel = data.novel;
  TrainLRConfig lr;
  lr.seed = derive_seed(seed, 10);
  lr.epochs = 60;
  b.bw = train_base_classifiers(b.base, lr);
  VagerTrainConfig vc;
  vc.seed = derive_seed(seed, 11);
  vc.max_outer_iters = 150;
  b.model = precompute_solver(
      train_vager(b.bw, build_graph(class_means(b.base)), vc));
  return b;
}

}  // namespace

TEST_CASE("run_binary_experiment") {
  const auto b = small_bench(2025);
  ExperimentConfig cfg;
  cfg.k = 5;
  cfg.trials = 3;
  cfg.lr.epochs = 60;
  cfg.seed = 5;

  SUBCASE("deterministic re-run") {
    const auto r1 = run_binary_experiment(b.base, b.novel, 8, b.model, b.bw, cfg);
    const auto r2 = run_binary_experiment(b.base, b.novel, 8, b.model, b.bw, cfg);
    REQUIRE(r1.per_trial.size() == r2.per_trial.size());
    for (std::size_t i = 0; i < r1.per_trial.size(); ++i) {
      CHECK(r1.per_trial[i].method == r2.per_trial[i].method);
      for (const auto& [name, v] : r1.per_trial[i].metrics)
        CHECK(v == r2.per_trial[i].metrics.at(name));
    }
  }
  SUBCASE("aggregate mean equals the arithmetic mean of trials") {
    const auto r = run_binary_experiment(b.base, b.novel, 8, b.model, b.bw, cfg);
    for (const auto& [method, metrics] : r.aggregates)
      for (const auto& [name, ms] : metrics) {
        double sum = 0.0;
        int count = 0;
        for (const auto& t : r.per_trial)
          if (t.method == method) {
            sum += t.metrics.at(name);
            ++count;
          }
        CHECK(std::abs(ms.first - sum / count) < 1e-12);
        CHECK(ms.first >= 0.0);
        CHECK(ms.first <= 1.0);
      }
  }
  SUBCASE("LR with ample shots clearly beats chance") {
    // mixture novel classes sit between base clusters, so perfect
    // separation from base negatives is out of reach by construction
    ExperimentConfig lr_cfg = cfg;
    lr_cfg.k = 20;
    lr_cfg.methods = {"LR"};
    const auto r =
        run_binary_experiment(b.base, b.novel, 8, b.model, b.bw, lr_cfg);
    CHECK(r.aggregates.at("LR").at("auc").first >= 0.75);
  }
  SUBCASE("unknown method rejected") {
    ExperimentConfig bad = cfg;
    bad.methods = {"NotAMethod"};
    CHECK_THROWS_AS(
        run_binary_experiment(b.base, b.novel, 8, b.model, b.bw, bad),
        data_error);
  }
}

TEST_CASE("run_multiway_experiment") {
  const auto b = small_bench(4040);
  ExperimentConfig cfg;
  cfg.k = 5;
  cfg.m = 3;  // all novel classes: degenerate full choice
  cfg.trials = 2;
  cfg.lr.epochs = 60;
  cfg.methods = {"VAGER", "LR-Softmax"};
  cfg.seed = 8;
  const auto r = run_multiway_experiment(b.base, b.novel, b.model, b.bw, cfg);
  for (const auto& t : r.per_trial) {
    CHECK(t.metrics.at("top1") >= 0.0);
    CHECK(t.metrics.at("top1") <= 1.0);
  }
  const auto r2 = run_multiway_experiment(b.base, b.novel, b.model, b.bw, cfg);
  for (std::size_t i = 0; i < r.per_trial.size(); ++i)
    CHECK(r.per_trial[i].metrics.at("top1") ==
          r2.per_trial[i].metrics.at("top1"));
}

TEST_CASE("multiway harness sanity: oracle and random-guess rates") {
  SUBCASE("an oracle handed the truth scores 1.0") {
    std::vector<std::int64_t> truths;
    Rng rng(1);
    for (int i = 0; i < 200; ++i)
      truths.push_back(static_cast<std::int64_t>(rng.next_below(5)));
    CHECK(top1_accuracy(truths, truths) == 1.0);
  }
  SUBCASE("uniform random guesses land near 1/m within 3 sigma") {
    const int m = 5, trials = 500, per_trial = 25;
    Rng rng(77);
    double total = 0.0;
    for (int t = 0; t < trials; ++t) {
      std::vector<std::int64_t> preds, truths;
      for (int i = 0; i < per_trial; ++i) {
        truths.push_back(static_cast<std::int64_t>(i % m));
        preds.push_back(static_cast<std::int64_t>(rng.next_below(m)));
      }
      total += top1_accuracy(preds, truths, true);
    }
    const double rate = total / trials;
    const double sigma =
        std::sqrt((1.0 / m) * (1.0 - 1.0 / m) / (trials * per_trial));
    CHECK(std::abs(rate - 1.0 / m) < 3.0 * sigma);
  }
}
