// Command-line driver for the VAGER toolkit: synthesize data, train base
// classifiers, learn the embedding model, transfer and fuse novel-class
// classifiers, and run the evaluation protocols.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "vager/classify.hpp"
#include "vager/errors.hpp"
#include "vager/eval.hpp"
#include "vager/features_io.hpp"
#include "vager/graph.hpp"
#include "vager/model_io.hpp"
#include "vager/synth.hpp"
#include "vager/transfer.hpp"
#include "vager/vager.hpp"

namespace fs = std::filesystem;
using namespace vager;

namespace {

bool g_quiet = false;

void info(const std::string& msg) {
  if (!g_quiet) std::cerr << msg << "\n";
}

// All artifacts are written to <path>.partial and renamed on success, so an
// aborted run leaves only .partial files behind.
template <typename WriteFn>
void atomic_write(const std::string& path, const WriteFn& write) {
  const std::string tmp = path + ".partial";
  write(tmp);
  fs::rename(tmp, path);
}

FeatureFormat parse_format(const std::string& s) {
  if (s == "csv") return FeatureFormat::csv;
  if (s == "binary") return FeatureFormat::binary;
  throw data_error("unknown feature format '" + s + "'");
}

FeatureSet load_features_auto(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  is.close();
  if (std::memcmp(magic, "VAGF", 4) == 0) return load_features_binary(path);
  return load_features_csv(path);
}

BaseWeights base_weights_from_classifiers(
    const std::vector<LinearClassifier>& clfs) {
  if (clfs.empty()) throw data_error("empty classifier file");
  std::vector<std::pair<std::int64_t, const LinearClassifier*>> sorted;
  for (const auto& c : clfs) sorted.emplace_back(c.class_id, &c);
  std::sort(sorted.begin(), sorted.end());
  BaseWeights bw;
  bw.W.resize(static_cast<int>(sorted.size()), sorted[0].second->p());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i].second->p() != bw.W.cols())
      throw data_error("inconsistent classifier dimensions");
    bw.class_ids.push_back(sorted[i].first);
    bw.W.row(static_cast<int>(i)) = sorted[i].second->w.transpose();
  }
  return bw;
}

struct LrFlags {
  TrainLRConfig cfg;
  void attach(CLI::App* app) {
    app->add_option("--lambda-reg", cfg.lambda_reg, "L2 coefficient");
    app->add_option("--epochs", cfg.epochs, "SGD epochs");
    app->add_option("--batch-size", cfg.batch_size, "SGD minibatch size");
    app->add_option("--lr-step", cfg.step_size, "SGD step size");
    app->add_option("--neg-per-pos", cfg.neg_per_pos,
                    "negatives sampled per positive");
  }
};

struct VagerFlags {
  VagerTrainConfig cfg;
  void attach(CLI::App* app) {
    app->add_option("--q", cfg.q, "embedding dimension (0 = auto)");
    app->add_option("--beta", cfg.beta, "graph term weight");
    app->add_option("--max-outer-iters", cfg.max_outer_iters);
    app->add_option("--inner-steps-v", cfg.inner_steps_V);
    app->add_option("--inner-steps-t", cfg.inner_steps_T);
    app->add_option("--step-size", cfg.step_size);
    app->add_option("--rel-tol", cfg.rel_tol);
    app->add_option("--init-scale", cfg.init_scale);
  }
};

Eigen::VectorXd kshot_mean(const FeatureSet& novel, std::int64_t class_id,
                           int k, std::uint64_t seed) {
  if (k <= 0) {
    const auto idx = novel.class_records(class_id);
    if (idx.empty())
      throw data_error("class " + std::to_string(class_id) + " not present");
    Eigen::VectorXd m = Eigen::VectorXd::Zero(novel.d);
    for (auto i : idx) m += novel.records[i].x;
    return m / static_cast<double>(idx.size());
  }
  auto [train, test] = split_kshot(novel, class_id, k, seed);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(novel.d);
  for (const auto& r : train.records) m += r.x;
  return m / static_cast<double>(train.records.size());
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  SynthConfig cfg;
  std::string preset = "benchmark";
  int n_novel = 5;
  std::string out_base = "base_features.csv";
  std::string out_novel = "novel_features.csv";
  std::string out_truth;
  std::string format = "csv";
};

void run_synth(const SynthArgs& args) {
  const int n_base = args.cfg.n_base > 0 ? args.cfg.n_base : 20;
  SynthConfig cfg;
  if (args.preset == "benchmark")
    cfg = default_benchmark_config(args.cfg.seed, args.n_novel, n_base);
  else if (args.preset == "sr-sweep")
    cfg = sr_sweep_config(args.cfg.seed, args.n_novel, n_base);
  else
    throw data_error("unknown preset '" + args.preset + "'");
  if (args.cfg.d > 0) cfg.d = args.cfg.d;
  if (args.cfg.samples_per_base > 0)
    cfg.samples_per_base = args.cfg.samples_per_base;
  if (args.cfg.samples_per_novel > 0)
    cfg.samples_per_novel = args.cfg.samples_per_novel;
  if (args.cfg.cluster_std > 0) cfg.cluster_std = args.cfg.cluster_std;
  if (args.cfg.center_scale > 0) cfg.center_scale = args.cfg.center_scale;

  const auto data = generate_synthetic(cfg);
  const auto fmt = parse_format(args.format);
  atomic_write(args.out_base,
               [&](const std::string& p) { save_features(data.base, p, fmt); });
  atomic_write(args.out_novel, [&](const std::string& p) {
    save_features(data.novel, p, fmt);
  });
  if (!args.out_truth.empty()) {
    atomic_write(args.out_truth, [&](const std::string& p) {
      std::ofstream os(p, std::ios::binary);
      os << "novel_class";
      for (int c = 0; c < cfg.n_base; ++c) os << ",w" << c;
      os << "\n";
      for (std::size_t i = 0; i < data.truth.size(); ++i) {
        os << cfg.n_base + i;
        for (double w : data.truth[i]) os << "," << detail::format_double(w);
        os << "\n";
      }
    });
  }
  info("synth: " + std::to_string(data.base.records.size()) + " base + " +
       std::to_string(data.novel.records.size()) + " novel samples");
}

// ---------------------------------------------------------------------------
// pipeline helpers shared by subcommands
// ---------------------------------------------------------------------------

std::vector<LinearClassifier> classifiers_from_base_weights(
    const BaseWeights& bw) {
  std::vector<LinearClassifier> out;
  for (int i = 0; i < bw.n(); ++i) {
    LinearClassifier c;
    c.class_id = bw.class_ids[i];
    c.provenance = Provenance::base;
    c.w = bw.W.row(i).transpose();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("VAGER_THREADS"))
    Eigen::setNbThreads(std::max(1, std::atoi(threads)));
  else
    Eigen::setNbThreads(1);
  if (const char* quiet = std::getenv("VAGER_QUIET"))
    g_quiet = std::string(quiet) != "0";

  CLI::App app{"VAGER toolkit: few-shot classifier generation by visual "
               "analogy over base classes"};
  app.require_subcommand(1);
  app.set_config("--config", "", "config file; keys mirror flag names");

  // --- synth ---
  SynthArgs synth_args;
  synth_args.cfg.n_base = 0;
  synth_args.cfg.d = 0;
  synth_args.cfg.samples_per_base = 0;
  synth_args.cfg.samples_per_novel = 0;
  synth_args.cfg.cluster_std = 0;
  synth_args.cfg.center_scale = 0;
  auto* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic desk-scale dataset");
  synth_cmd->add_option("--seed", synth_args.cfg.seed, "master seed")
      ->required();
  synth_cmd->add_option("--n-base", synth_args.cfg.n_base);
  synth_cmd->add_option("--d", synth_args.cfg.d);
  synth_cmd->add_option("--samples-per-base", synth_args.cfg.samples_per_base);
  synth_cmd->add_option("--samples-per-novel",
                        synth_args.cfg.samples_per_novel);
  synth_cmd->add_option("--cluster-std", synth_args.cfg.cluster_std);
  synth_cmd->add_option("--center-scale", synth_args.cfg.center_scale);
  synth_cmd->add_option("--preset", synth_args.preset,
                        "novel-class preset: benchmark | sr-sweep");
  synth_cmd->add_option("--n-novel", synth_args.n_novel);
  synth_cmd->add_option("--out-base", synth_args.out_base);
  synth_cmd->add_option("--out-novel", synth_args.out_novel);
  synth_cmd->add_option("--out-truth", synth_args.out_truth);
  synth_cmd->add_option("--format", synth_args.format, "csv | binary");

  // --- train-base ---
  std::string tb_base, tb_out = "base_weights.vagc";
  std::uint64_t tb_seed = 0;
  bool tb_l2norm = false;
  LrFlags tb_lr;
  auto* tb_cmd = app.add_subcommand(
      "train-base", "train one-vs-rest logistic classifiers for base classes");
  tb_cmd->add_option("--base", tb_base, "base feature file")->required();
  tb_cmd->add_option("--seed", tb_seed, "master seed")->required();
  tb_cmd->add_option("--out", tb_out, "output classifier file");
  tb_cmd->add_flag("--l2-normalize", tb_l2norm,
                   "L2-normalize features before training");
  tb_lr.attach(tb_cmd);

  // --- embed ---
  std::string em_base, em_weights, em_out = "model.vagm", em_dump_graph;
  std::uint64_t em_seed = 0;
  VagerFlags em_vager;
  auto* em_cmd = app.add_subcommand(
      "embed", "learn class embeddings V and mapping T on base classes");
  em_cmd->add_option("--base", em_base)->required();
  em_cmd->add_option("--weights", em_weights, "base classifier file")
      ->required();
  em_cmd->add_option("--seed", em_seed)->required();
  em_cmd->add_option("--out", em_out, "output model file");
  em_cmd->add_option("--dump-graph", em_dump_graph,
                     "also write the analogy graph as a CSV matrix");
  em_vager.attach(em_cmd);

  // --- transfer ---
  std::string tr_model, tr_base, tr_novel, tr_out = "transferred.vagc";
  int tr_k = 0;
  std::uint64_t tr_seed = 0;
  auto* tr_cmd = app.add_subcommand(
      "transfer", "generate transferred classifiers for novel classes");
  tr_cmd->add_option("--model", tr_model)->required();
  tr_cmd->add_option("--base", tr_base)->required();
  tr_cmd->add_option("--novel", tr_novel)->required();
  tr_cmd->add_option("--k", tr_k, "shots per novel class (0 = all samples)");
  tr_cmd->add_option("--seed", tr_seed)->required();
  tr_cmd->add_option("--out", tr_out);

  // --- fuse ---
  std::string fu_model, fu_base, fu_novel, fu_out = "fused.vagc";
  std::string fu_strategy = "voting";
  double fu_lambda = 1.0;
  int fu_k = 1;
  std::uint64_t fu_seed = 0;
  LrFlags fu_lr;
  auto* fu_cmd = app.add_subcommand(
      "fuse", "fuse transferred and data-trained classifiers");
  fu_cmd->add_option("--model", fu_model)->required();
  fu_cmd->add_option("--base", fu_base)->required();
  fu_cmd->add_option("--novel", fu_novel)->required();
  fu_cmd->add_option("--strategy", fu_strategy,
                     "initializing | tuning | voting");
  fu_cmd->add_option("--lambda", fu_lambda, "fusion weight");
  fu_cmd->add_option("--k", fu_k, "shots per novel class");
  fu_cmd->add_option("--seed", fu_seed)->required();
  fu_cmd->add_option("--out", fu_out);
  fu_lr.attach(fu_cmd);

  // --- eval ---
  std::string ev_base, ev_novel, ev_model, ev_weights, ev_out = "report";
  std::string ev_protocol = "binary";
  std::string ev_methods;
  int ev_k = 1, ev_m = 5, ev_trials = 50, ev_sr_K = 10;
  double ev_voting_lambda = 1.0, ev_tuning_lambda = 1.0;
  std::uint64_t ev_seed = 0;
  LrFlags ev_lr;
  auto* ev_cmd =
      app.add_subcommand("eval", "run an evaluation protocol and write reports");
  ev_cmd->add_option("--base", ev_base)->required();
  ev_cmd->add_option("--novel", ev_novel)->required();
  ev_cmd->add_option("--model", ev_model)->required();
  ev_cmd->add_option("--weights", ev_weights)->required();
  ev_cmd->add_option("--protocol", ev_protocol, "binary | multiway | sr");
  ev_cmd->add_option("--methods", ev_methods, "comma-separated method names");
  ev_cmd->add_option("--k", ev_k);
  ev_cmd->add_option("--m", ev_m);
  ev_cmd->add_option("--trials", ev_trials);
  ev_cmd->add_option("--sr-k", ev_sr_K, "K for the similarity ratio");
  ev_cmd->add_option("--voting-lambda", ev_voting_lambda);
  ev_cmd->add_option("--tuning-lambda", ev_tuning_lambda);
  ev_cmd->add_option("--seed", ev_seed)->required();
  ev_cmd->add_option("--out", ev_out, "output prefix");
  ev_lr.attach(ev_cmd);

  // --- pipeline ---
  std::string pl_out = "run", pl_base, pl_novel;
  int pl_k = 1, pl_m = 5, pl_trials = 50;
  std::uint64_t pl_seed = 0;
  auto* pl_cmd = app.add_subcommand(
      "pipeline", "end-to-end: synth -> train-base -> embed -> transfer -> "
                  "fuse -> evaluate -> report");
  pl_cmd->add_option("--out-dir", pl_out)->required();
  pl_cmd->add_option("--seed", pl_seed)->required();
  pl_cmd->add_option("--base", pl_base, "base features (default: synthesize)");
  pl_cmd->add_option("--novel", pl_novel, "novel features");
  pl_cmd->add_option("--k", pl_k);
  pl_cmd->add_option("--m", pl_m);
  pl_cmd->add_option("--trials", pl_trials);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  std::string stage = "startup";
  try {
    if (synth_cmd->parsed()) {
      stage = "synth";
      run_synth(synth_args);
    }

    if (tb_cmd->parsed()) {
      stage = "train-base";
      FeatureSet base = load_features_auto(tb_base);
      if (tb_l2norm) base = l2_normalized(base);
      TrainLRConfig cfg = tb_lr.cfg;
      cfg.seed = tb_seed;
      const auto bw = train_base_classifiers(base, cfg);
      atomic_write(tb_out, [&](const std::string& p) {
        save_classifiers(classifiers_from_base_weights(bw), p);
      });
      info("train-base: " + std::to_string(bw.n()) + " classifiers -> " +
           tb_out);
    }

    if (em_cmd->parsed()) {
      stage = "embed";
      const FeatureSet base = load_features_auto(em_base);
      const auto bw = base_weights_from_classifiers(load_classifiers(em_weights));
      const auto means = class_means(base);
      const auto graph = build_graph(means);
      VagerTrainConfig cfg = em_vager.cfg;
      cfg.seed = em_seed;
      auto model = precompute_solver(train_vager(bw, graph, cfg));
      atomic_write(em_out,
                   [&](const std::string& p) { save_model(model, p); });
      if (!em_dump_graph.empty()) {
        atomic_write(em_dump_graph, [&](const std::string& p) {
          std::ofstream os(p, std::ios::binary);
          for (int i = 0; i < graph.n(); ++i) {
            for (int j = 0; j < graph.n(); ++j)
              os << (j ? "," : "") << detail::format_double(graph.A(i, j));
            os << "\n";
          }
        });
      }
      info("embed: loss " + std::to_string(model.final_loss) + " after " +
           std::to_string(model.outer_iters) + " outer iterations -> " +
           em_out);
    }

    if (tr_cmd->parsed()) {
      stage = "transfer";
      const auto model = load_model(tr_model);
      const FeatureSet base = load_features_auto(tr_base);
      const FeatureSet novel = load_features_auto(tr_novel);
      const auto means = class_means(base);
      std::vector<LinearClassifier> out;
      for (auto cid : novel.class_ids()) {
        const auto mean =
            kshot_mean(novel, cid, tr_k, derive_seed(tr_seed, cid));
        const auto a = novel_similarity(means, mean);
        const auto emb = infer_embedding(model, a);
        LinearClassifier c;
        c.class_id = cid;
        c.provenance = Provenance::transferred;
        c.w = transfer_weights(emb, model);
        out.push_back(std::move(c));
      }
      atomic_write(tr_out,
                   [&](const std::string& p) { save_classifiers(out, p); });
      info("transfer: " + std::to_string(out.size()) + " classifiers -> " +
           tr_out);
    }

    if (fu_cmd->parsed()) {
      stage = "fuse";
      const auto model = load_model(fu_model);
      const FeatureSet base = load_features_auto(fu_base);
      const FeatureSet novel = load_features_auto(fu_novel);
      const auto means = class_means(base);
      std::vector<LinearClassifier> out;
      for (auto cid : novel.class_ids()) {
        const std::uint64_t cseed = derive_seed(fu_seed, cid);
        auto [train_pos, rest] = split_kshot(novel, cid, fu_k, cseed);
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(novel.d);
        for (const auto& r : train_pos.records) mean += r.x;
        mean /= static_cast<double>(train_pos.records.size());
        const auto a = novel_similarity(means, mean);
        const auto emb = infer_embedding(model, a);
        LinearClassifier w_trans;
        w_trans.class_id = cid;
        w_trans.provenance = Provenance::transferred;
        w_trans.w = transfer_weights(emb, model);

        TrainLRConfig lr = fu_lr.cfg;
        lr.seed = derive_seed(cseed, 1);
        const auto train_neg = vager::detail::sample_negatives(
            base, {}, static_cast<std::size_t>(lr.neg_per_pos) * fu_k,
            derive_seed(cseed, 2));
        if (fu_strategy == "initializing")
          out.push_back(fuse_initializing(w_trans, train_pos, train_neg, lr));
        else if (fu_strategy == "tuning")
          out.push_back(
              fuse_tuning(w_trans, train_pos, train_neg, fu_lambda, lr));
        else if (fu_strategy == "voting")
          out.push_back(fuse_voting(
              w_trans,
              train_logistic(train_pos, train_neg, lr, std::nullopt, cid),
              fu_lambda));
        else
          throw data_error("unknown fusion strategy '" + fu_strategy + "'");
      }
      atomic_write(fu_out,
                   [&](const std::string& p) { save_classifiers(out, p); });
      info("fuse: " + std::to_string(out.size()) + " classifiers -> " + fu_out);
    }

    if (ev_cmd->parsed()) {
      stage = "eval";
      const FeatureSet base = load_features_auto(ev_base);
      const FeatureSet novel = load_features_auto(ev_novel);
      const auto model = load_model(ev_model);
      const auto bw = base_weights_from_classifiers(load_classifiers(ev_weights));
      ExperimentConfig cfg;
      cfg.k = ev_k;
      cfg.m = ev_m;
      cfg.trials = ev_trials;
      cfg.voting_lambda = ev_voting_lambda;
      cfg.tuning_lambda = ev_tuning_lambda;
      cfg.lr = ev_lr.cfg;
      cfg.seed = ev_seed;
      if (!ev_methods.empty()) {
        cfg.methods.clear();
        std::stringstream ss(ev_methods);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.methods.push_back(tok);
      }
      if (ev_protocol == "binary") {
        EvalReport merged;
        merged.metadata["protocol"] = "binary";
        merged.metadata["k"] = std::to_string(cfg.k);
        merged.metadata["trials"] = std::to_string(cfg.trials);
        merged.metadata["seed"] = std::to_string(cfg.seed);
        for (auto cid : novel.class_ids()) {
          ExperimentConfig per = cfg;
          per.seed = derive_seed(cfg.seed, cid);
          auto r = run_binary_experiment(base, novel, cid, model, bw, per);
          for (auto& t : r.per_trial) merged.per_trial.push_back(std::move(t));
        }
        merged.finalize();
        atomic_write(ev_out + ".txt", [&](const std::string& p) {
          save_report_text(merged, p);
        });
        atomic_write(ev_out + "_trials.csv", [&](const std::string& p) {
          save_report_trials_csv(merged, p);
        });
      } else if (ev_protocol == "multiway") {
        auto r = run_multiway_experiment(base, novel, model, bw, cfg);
        atomic_write(ev_out + ".txt",
                     [&](const std::string& p) { save_report_text(r, p); });
        atomic_write(ev_out + "_trials.csv", [&](const std::string& p) {
          save_report_trials_csv(r, p);
        });
      } else if (ev_protocol == "sr") {
        const auto means = class_means(base);
        std::vector<std::pair<double, double>> points;
        for (auto cid : novel.class_ids()) {
          ExperimentConfig per = cfg;
          per.seed = derive_seed(cfg.seed, cid);
          per.methods = {"VAGER+Voting", "LR"};
          const auto r = run_binary_experiment(base, novel, cid, model, bw, per);
          const double gap = r.aggregates.at("VAGER+Voting").at("auc").first -
                             r.aggregates.at("LR").at("auc").first;
          const auto mean = kshot_mean(novel, cid, 0, 0);
          const double sr =
              similarity_ratio(novel_similarity(means, mean), ev_sr_K);
          points.emplace_back(sr, gap);
        }
        const auto fit = sr_improvement_regression(points);
        atomic_write(ev_out + "_sr_points.csv", [&](const std::string& p) {
          save_sr_points_csv(points, p);
        });
        atomic_write(ev_out + ".txt", [&](const std::string& p) {
          std::ofstream os(p, std::ios::binary);
          os << "[sr_regression]\n";
          os << "slope = " << detail::format_double(fit.slope) << "\n";
          os << "intercept = " << detail::format_double(fit.intercept) << "\n";
          os << "pearson_r = " << detail::format_double(fit.pearson_r) << "\n";
          os << "r_squared = " << detail::format_double(fit.r_squared) << "\n";
          os << "ci95_slope_lo = " << detail::format_double(fit.ci95_slope.first)
             << "\n";
          os << "ci95_slope_hi = "
             << detail::format_double(fit.ci95_slope.second) << "\n";
          os << "n_points = " << fit.n_points << "\n";
        });
      } else {
        throw data_error("unknown protocol '" + ev_protocol + "'");
      }
      info("eval: wrote " + ev_out + ".txt");
    }

    if (pl_cmd->parsed()) {
      stage = "pipeline";
      fs::create_directories(pl_out);
      const auto path = [&](const std::string& name) {
        return (fs::path(pl_out) / name).string();
      };

      stage = "pipeline/synth";
      FeatureSet base, novel;
      if (pl_base.empty()) {
        const auto cfg = default_benchmark_config(derive_seed(pl_seed, 1));
        const auto data = generate_synthetic(cfg);
        base = data.base;
        novel = data.novel;
        atomic_write(path("base_features.csv"), [&](const std::string& p) {
          save_features_csv(base, p);
        });
        atomic_write(path("novel_features.csv"), [&](const std::string& p) {
          save_features_csv(novel, p);
        });
      } else {
        base = load_features_auto(pl_base);
        if (pl_novel.empty())
          throw data_error("--novel is required when --base is given");
        novel = load_features_auto(pl_novel);
      }

      stage = "pipeline/train-base";
      TrainLRConfig lr;
      lr.seed = derive_seed(pl_seed, 2);
      const auto bw = train_base_classifiers(base, lr);
      atomic_write(path("base_weights.vagc"), [&](const std::string& p) {
        save_classifiers(classifiers_from_base_weights(bw), p);
      });

      stage = "pipeline/embed";
      const auto means = class_means(base);
      const auto graph = build_graph(means);
      VagerTrainConfig vcfg;
      vcfg.seed = derive_seed(pl_seed, 3);
      auto model = precompute_solver(train_vager(bw, graph, vcfg));
      atomic_write(path("model.vagm"),
                   [&](const std::string& p) { save_model(model, p); });

      stage = "pipeline/transfer";
      std::vector<LinearClassifier> transferred;
      for (auto cid : novel.class_ids()) {
        const auto mean = kshot_mean(novel, cid, 0, 0);
        const auto emb =
            infer_embedding(model, novel_similarity(means, mean));
        LinearClassifier c;
        c.class_id = cid;
        c.provenance = Provenance::transferred;
        c.w = transfer_weights(emb, model);
        transferred.push_back(std::move(c));
      }
      atomic_write(path("transferred.vagc"), [&](const std::string& p) {
        save_classifiers(transferred, p);
      });

      stage = "pipeline/eval";
      ExperimentConfig ecfg;
      ecfg.k = pl_k;
      ecfg.m = pl_m;
      ecfg.trials = pl_trials;
      ecfg.seed = derive_seed(pl_seed, 4);
      EvalReport merged;
      merged.metadata["protocol"] = "binary";
      merged.metadata["k"] = std::to_string(ecfg.k);
      merged.metadata["trials"] = std::to_string(ecfg.trials);
      merged.metadata["seed"] = std::to_string(ecfg.seed);
      for (auto cid : novel.class_ids()) {
        ExperimentConfig per = ecfg;
        per.seed = derive_seed(ecfg.seed, cid);
        auto r = run_binary_experiment(base, novel, cid, model, bw, per);
        for (auto& t : r.per_trial) merged.per_trial.push_back(std::move(t));
      }
      merged.finalize();
      atomic_write(path("binary_report.txt"), [&](const std::string& p) {
        save_report_text(merged, p);
      });
      atomic_write(path("binary_trials.csv"), [&](const std::string& p) {
        save_report_trials_csv(merged, p);
      });

      ExperimentConfig mcfg = ecfg;
      mcfg.trials = std::min(pl_trials, 20);
      mcfg.methods = {"VAGER", "VAGER+Voting", "LR", "LR-Softmax"};
      mcfg.seed = derive_seed(pl_seed, 5);
      const auto mr = run_multiway_experiment(base, novel, model, bw, mcfg);
      atomic_write(path("multiway_report.txt"), [&](const std::string& p) {
        save_report_text(mr, p);
      });
      atomic_write(path("multiway_trials.csv"), [&](const std::string& p) {
        save_report_trials_csv(mr, p);
      });
      info("pipeline: artifacts in " + pl_out);
    }
  } catch (const numeric_error& e) {
    std::cerr << "error [" << stage << "]: " << e.what() << "\n";
    return 3;
  } catch (const data_error& e) {
    std::cerr << "error [" << stage << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error [" << stage << "]: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
