#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "vager/errors.hpp"
#include "vager/rng.hpp"

namespace vager {

struct FeatureRecord {
  std::int64_t class_id = 0;
  std::int64_t sample_id = 0;
  Eigen::VectorXd x;
};

// Labeled feature vectors of a fixed dimension d.
struct FeatureSet {
  int d = 0;
  std::vector<FeatureRecord> records;

  void validate() const {
    if (d <= 0) throw data_error("feature dimension must be positive");
    std::set<std::pair<std::int64_t, std::int64_t>> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (r.x.size() != d)
        throw data_error("record " + std::to_string(i) + ": vector length " +
                         std::to_string(r.x.size()) + " != d=" +
                         std::to_string(d));
      for (int j = 0; j < r.x.size(); ++j)
        if (!std::isfinite(r.x[j]))
          throw data_error("record " + std::to_string(i) +
                           ": non-finite value at coordinate " +
                           std::to_string(j));
      if (!seen.emplace(r.class_id, r.sample_id).second)
        throw data_error("record " + std::to_string(i) +
                         ": duplicate (class_id, sample_id) pair (" +
                         std::to_string(r.class_id) + ", " +
                         std::to_string(r.sample_id) + ")");
    }
  }

  // Distinct class ids, ascending.
  std::vector<std::int64_t> class_ids() const {
    std::set<std::int64_t> ids;
    for (const auto& r : records) ids.insert(r.class_id);
    return {ids.begin(), ids.end()};
  }

  // Record indices belonging to one class, in stored order.
  std::vector<std::size_t> class_records(std::int64_t class_id) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].class_id == class_id) idx.push_back(i);
    return idx;
  }

  FeatureSet subset(const std::vector<std::size_t>& idx) const {
    FeatureSet out;
    out.d = d;
    out.records.reserve(idx.size());
    for (std::size_t i : idx) out.records.push_back(records[i]);
    return out;
  }
};

// Per-class mean vectors; rows follow class_ids (ascending) order.
struct ClassMeans {
  std::vector<std::int64_t> class_ids;
  Eigen::MatrixXd M;  // n x d

  int n() const { return static_cast<int>(class_ids.size()); }
  int d() const { return static_cast<int>(M.cols()); }

  int index_of(std::int64_t class_id) const {
    const auto it =
        std::lower_bound(class_ids.begin(), class_ids.end(), class_id);
    if (it == class_ids.end() || *it != class_id)
      throw data_error("unknown class id " + std::to_string(class_id));
    return static_cast<int>(it - class_ids.begin());
  }
};

inline ClassMeans class_means(const FeatureSet& fs) {
  std::map<std::int64_t, std::pair<Eigen::VectorXd, std::size_t>> acc;
  for (const auto& r : fs.records) {
    auto it = acc.find(r.class_id);
    if (it == acc.end())
      acc.emplace(r.class_id, std::make_pair(r.x, std::size_t{1}));
    else {
      it->second.first += r.x;
      it->second.second += 1;
    }
  }
  if (acc.empty()) throw data_error("empty feature set");
  ClassMeans cm;
  cm.M.resize(static_cast<int>(acc.size()), fs.d);
  int row = 0;
  for (const auto& [cid, sum_count] : acc) {
    cm.class_ids.push_back(cid);
    cm.M.row(row) =
        sum_count.first.transpose() / static_cast<double>(sum_count.second);
    if (cm.M.row(row).norm() == 0.0)
      throw data_error("class " + std::to_string(cid) +
                       " has a zero mean vector");
    ++row;
  }
  return cm;
}

// Seeded k-shot split of one class: k train samples, the rest as test.
inline std::pair<FeatureSet, FeatureSet> split_kshot(const FeatureSet& fs,
                                                     std::int64_t class_id,
                                                     int k,
                                                     std::uint64_t seed) {
  const auto idx = fs.class_records(class_id);
  if (idx.empty())
    throw data_error("class " + std::to_string(class_id) + " not present");
  if (k < 1 || static_cast<std::size_t>(k) >= idx.size())
    throw data_error("k=" + std::to_string(k) + " out of range for class of " +
                     std::to_string(idx.size()) + " samples");
  Rng rng(seed);
  auto chosen = rng.sample_without_replacement(idx.size(),
                                               static_cast<std::size_t>(k));
  std::set<std::size_t> train_set(chosen.begin(), chosen.end());
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (train_set.count(i))
      train_idx.push_back(idx[i]);
    else
      test_idx.push_back(idx[i]);
  }
  return {fs.subset(train_idx), fs.subset(test_idx)};
}

// Optionally L2-normalize every feature vector (consumer-side choice;
// stored files always carry raw vectors).
inline FeatureSet l2_normalized(const FeatureSet& fs) {
  FeatureSet out = fs;
  for (auto& r : out.records) {
    const double norm = r.x.norm();
    if (norm == 0.0) throw data_error("cannot L2-normalize a zero vector");
    r.x /= norm;
  }
  return out;
}

}  // namespace vager
