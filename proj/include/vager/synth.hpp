#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vager/errors.hpp"
#include "vager/features.hpp"
#include "vager/rng.hpp"

namespace vager {

// One novel class as a convex mixture over base-class centers.
struct NovelSpec {
  std::vector<double> weights;  // length n_base, sums to 1
  double noise_std = 0.0;       // perturbation of the mixed center
};

struct SynthConfig {
  int n_base = 20;
  int d = 16;
  int samples_per_base = 60;
  int samples_per_novel = 40;
  double cluster_std = 0.25;
  double center_scale = 1.0;
  // Fraction of coordinates carrying most of a center's mass; entries outside
  // the active set are damped to 5%. 1.0 gives dense centers (high mutual
  // cosines), small values give nearly disjoint supports (low background
  // similarity between classes).
  double center_sparsity = 1.0;
  std::vector<NovelSpec> novel_spec;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_base < 2) throw data_error("n_base must be >= 2");
    if (d < 2) throw data_error("d must be >= 2");
    if (samples_per_base < 2) throw data_error("samples_per_base must be >= 2");
    if (samples_per_novel < 2)
      throw data_error("samples_per_novel must be >= 2");
    if (cluster_std <= 0.0) throw data_error("cluster_std must be > 0");
    if (center_scale <= 0.0) throw data_error("center_scale must be > 0");
    if (center_sparsity <= 0.0 || center_sparsity > 1.0)
      throw data_error("center_sparsity must be in (0, 1]");
    for (std::size_t i = 0; i < novel_spec.size(); ++i) {
      const auto& spec = novel_spec[i];
      if (static_cast<int>(spec.weights.size()) != n_base)
        throw data_error("novel class " + std::to_string(i) +
                         ": mixture has " +
                         std::to_string(spec.weights.size()) +
                         " weights, expected " + std::to_string(n_base));
      double sum = 0.0;
      for (double w : spec.weights) {
        if (w < 0.0)
          throw data_error("novel class " + std::to_string(i) +
                           ": negative mixture weight");
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw data_error("novel class " + std::to_string(i) +
                         ": mixture weights sum to " + std::to_string(sum) +
                         ", expected 1");
      if (spec.noise_std < 0.0)
        throw data_error("novel class " + std::to_string(i) +
                         ": negative noise std");
    }
  }
};

struct SyntheticData {
  FeatureSet base;
  FeatureSet novel;
  Eigen::MatrixXd base_centers;             // n_base x d
  std::vector<std::vector<double>> truth;   // mixture weights per novel class
};

// Base class c: isotropic Gaussian at a nonnegative center (mimicking
// post-ReLU features, and keeping pairwise cosines positive). Novel class:
// convex mixture of base centers plus center noise, same cluster spread.
// Pure function of cfg; base ids are 0..n_base-1, novel ids follow.
inline SyntheticData generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SyntheticData out;
  out.base.d = cfg.d;
  out.novel.d = cfg.d;

  Rng center_rng(derive_seed(cfg.seed, 1));
  out.base_centers.resize(cfg.n_base, cfg.d);
  for (int c = 0; c < cfg.n_base; ++c)
    for (int j = 0; j < cfg.d; ++j) {
      const double mag = cfg.center_scale * std::abs(center_rng.next_gaussian());
      const bool active = center_rng.next_uniform() < cfg.center_sparsity;
      out.base_centers(c, j) = active ? mag : 0.05 * mag;
    }

  Rng base_rng(derive_seed(cfg.seed, 2));
  for (int c = 0; c < cfg.n_base; ++c) {
    for (int s = 0; s < cfg.samples_per_base; ++s) {
      FeatureRecord r;
      r.class_id = c;
      r.sample_id = s;
      r.x.resize(cfg.d);
      for (int j = 0; j < cfg.d; ++j)
        r.x[j] =
            out.base_centers(c, j) + cfg.cluster_std * base_rng.next_gaussian();
      out.base.records.push_back(std::move(r));
    }
  }

  Rng novel_rng(derive_seed(cfg.seed, 3));
  for (std::size_t i = 0; i < cfg.novel_spec.size(); ++i) {
    const auto& spec = cfg.novel_spec[i];
    Eigen::VectorXd center = Eigen::VectorXd::Zero(cfg.d);
    for (int c = 0; c < cfg.n_base; ++c)
      center += spec.weights[c] * out.base_centers.row(c).transpose();
    for (int j = 0; j < cfg.d; ++j)
      center[j] += spec.noise_std * novel_rng.next_gaussian();
    const std::int64_t class_id = cfg.n_base + static_cast<std::int64_t>(i);
    for (int s = 0; s < cfg.samples_per_novel; ++s) {
      FeatureRecord r;
      r.class_id = class_id;
      r.sample_id = s;
      r.x.resize(cfg.d);
      for (int j = 0; j < cfg.d; ++j)
        r.x[j] = center[j] + cfg.cluster_std * novel_rng.next_gaussian();
      out.novel.records.push_back(std::move(r));
    }
    out.truth.push_back(spec.weights);
  }
  return out;
}

// Two-center mixture spread over distinct base pairs; the default
// desk-scale benchmark.
inline SynthConfig default_benchmark_config(std::uint64_t seed,
                                            int n_novel = 5, int n_base = 20) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_base = n_base;
  for (int i = 0; i < n_novel; ++i) {
    NovelSpec spec;
    spec.weights.assign(cfg.n_base, 0.0);
    spec.weights[(2 * i) % cfg.n_base] = 0.6;
    spec.weights[(2 * i + 1) % cfg.n_base] = 0.4;
    spec.noise_std = 0.05;
    cfg.novel_spec.push_back(std::move(spec));
  }
  return cfg;
}

// Novel classes sweeping mixture concentration from diffuse (near-uniform
// over every center) to peaked (almost all mass on one center); used by the
// similarity-ratio diagnostics. Sparse centers keep the background
// similarity between unrelated classes low, so the ratio has real range.
inline SynthConfig sr_sweep_config(std::uint64_t seed, int n_novel = 24,
                                   int n_base = 20) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_base = n_base;
  cfg.d = 32;
  cfg.center_sparsity = 0.25;
  for (int i = 0; i < n_novel; ++i) {
    NovelSpec spec;
    spec.weights.assign(cfg.n_base, 0.0);
    const double t =
        n_novel > 1 ? static_cast<double>(i) / (n_novel - 1) : 1.0;
    const double uniform = 1.0 / n_base;
    const double top = uniform + (0.98 - uniform) * t;  // anchor mass
    const int anchor = i % cfg.n_base;
    spec.weights[anchor] = top;
    for (int jj = 1; jj < cfg.n_base; ++jj)
      spec.weights[(anchor + jj) % cfg.n_base] = (1.0 - top) / (n_base - 1);
    spec.noise_std = 0.02;
    cfg.novel_spec.push_back(std::move(spec));
  }
  return cfg;
}

}  // namespace vager
