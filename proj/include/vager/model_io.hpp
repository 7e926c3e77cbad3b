#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "vager/classify.hpp"
#include "vager/errors.hpp"
#include "vager/eval.hpp"
#include "vager/features_io.hpp"
#include "vager/vager.hpp"

namespace vager {

namespace detail {

inline void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) write_le<double>(os, m(i, j));
}

inline Eigen::MatrixXd read_matrix(std::istream& is, int rows, int cols,
                                   const char* what) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = read_le<double>(is, what);
  return m;
}

}  // namespace detail

// Model file: "VAGM", u32 version=1, shape header, metadata, then V, T, W, A
// (and the solver cache when present) as little-endian f64 arrays.
inline void save_model(const EmbeddingModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open " + path + " for writing");
  os.write("VAGM", 4);
  detail::write_le<std::uint32_t>(os, 1);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.n()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.q()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.p()));
  detail::write_le<double>(os, model.beta);
  detail::write_le<double>(os, model.final_loss);
  detail::write_le<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(model.outer_iters));
  detail::write_le<std::uint8_t>(os, model.pinv_cache ? 1 : 0);
  for (auto cid : model.class_ids)
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(cid));
  detail::write_matrix(os, model.V);
  detail::write_matrix(os, model.T);
  detail::write_matrix(os, model.W);
  detail::write_matrix(os, model.A);
  if (model.pinv_cache) detail::write_matrix(os, *model.pinv_cache);
  if (!os) throw data_error("write failed for " + path);
}

inline EmbeddingModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "VAGM", 4) != 0)
    throw data_error(path + ": bad magic, not a VAGM model file");
  const auto version = detail::read_le<std::uint32_t>(is, "version");
  if (version != 1)
    throw data_error(path + ": unsupported version " +
                     std::to_string(version));
  const int n = static_cast<int>(detail::read_le<std::uint32_t>(is, "n"));
  const int q = static_cast<int>(detail::read_le<std::uint32_t>(is, "q"));
  const int p = static_cast<int>(detail::read_le<std::uint32_t>(is, "p"));
  if (n < 1 || q < 1 || p < 1 || q > p)
    throw data_error(path + ": inconsistent shape header");
  EmbeddingModel model;
  model.beta = detail::read_le<double>(is, "beta");
  model.final_loss = detail::read_le<double>(is, "final_loss");
  model.outer_iters =
      static_cast<int>(detail::read_le<std::uint32_t>(is, "outer_iters"));
  const auto has_cache = detail::read_le<std::uint8_t>(is, "cache flag");
  model.class_ids.resize(n);
  for (int i = 0; i < n; ++i)
    model.class_ids[i] = static_cast<std::int64_t>(
        detail::read_le<std::uint64_t>(is, "class id"));
  model.V = detail::read_matrix(is, n, q, "V");
  model.T = detail::read_matrix(is, q, p, "T");
  model.W = detail::read_matrix(is, n, p, "W");
  model.A = detail::read_matrix(is, n, n, "A");
  if (has_cache) model.pinv_cache = detail::read_matrix(is, n, q, "cache");
  is.peek();
  if (!is.eof()) throw data_error(path + ": trailing bytes after model data");
  return model;
}

// Classifier file: "VAGC", u32 version=1, u64 count, then records as
// (u64 class_id, u8 provenance, u32 p, p little-endian f64).
inline void save_classifiers(const std::vector<LinearClassifier>& classifiers,
                             const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open " + path + " for writing");
  os.write("VAGC", 4);
  detail::write_le<std::uint32_t>(os, 1);
  detail::write_le<std::uint64_t>(os, classifiers.size());
  for (const auto& c : classifiers) {
    detail::write_le<std::uint64_t>(os,
                                    static_cast<std::uint64_t>(c.class_id));
    detail::write_le<std::uint8_t>(os,
                                   static_cast<std::uint8_t>(c.provenance));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.p()));
    for (int j = 0; j < c.p(); ++j) detail::write_le<double>(os, c.w[j]);
  }
  if (!os) throw data_error("write failed for " + path);
}

inline std::vector<LinearClassifier> load_classifiers(
    const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "VAGC", 4) != 0)
    throw data_error(path + ": bad magic, not a VAGC classifier file");
  const auto version = detail::read_le<std::uint32_t>(is, "version");
  if (version != 1)
    throw data_error(path + ": unsupported version " +
                     std::to_string(version));
  const auto count = detail::read_le<std::uint64_t>(is, "classifier count");
  std::vector<LinearClassifier> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    LinearClassifier c;
    c.class_id = static_cast<std::int64_t>(
        detail::read_le<std::uint64_t>(is, "class id"));
    const auto prov = detail::read_le<std::uint8_t>(is, "provenance");
    if (prov > 3) throw data_error(path + ": bad provenance tag");
    c.provenance = static_cast<Provenance>(prov);
    const auto p = detail::read_le<std::uint32_t>(is, "p");
    c.w.resize(p);
    for (std::uint32_t j = 0; j < p; ++j)
      c.w[j] = detail::read_le<double>(is, "weight");
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report export: structured text summary plus flat CSVs.
// ---------------------------------------------------------------------------

inline void save_report_text(const EvalReport& report,
                             const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open " + path + " for writing");
  os << "[metadata]\n";
  for (const auto& [k, v] : report.metadata) os << k << " = " << v << "\n";
  os << "\n[aggregates]\n";
  for (const auto& [method, metrics] : report.aggregates)
    for (const auto& [name, ms] : metrics)
      os << method << "." << name << ".mean = "
         << detail::format_double(ms.first) << "\n"
         << method << "." << name << ".std = "
         << detail::format_double(ms.second) << "\n";
  if (!os) throw data_error("write failed for " + path);
}

inline void save_report_trials_csv(const EvalReport& report,
                                   const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open " + path + " for writing");
  std::set<std::string> metric_names;
  for (const auto& t : report.per_trial)
    for (const auto& [name, v] : t.metrics) metric_names.insert(name);
  os << "trial,trial_seed,method";
  for (const auto& name : metric_names) os << "," << name;
  os << "\n";
  for (const auto& t : report.per_trial) {
    os << t.trial << "," << t.trial_seed << "," << t.method;
    for (const auto& name : metric_names) {
      const auto it = t.metrics.find(name);
      os << ",";
      if (it != t.metrics.end()) os << detail::format_double(it->second);
    }
    os << "\n";
  }
  if (!os) throw data_error("write failed for " + path);
}

inline void save_roc_csv(const std::vector<std::pair<double, double>>& points,
                         const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open " + path + " for writing");
  os << "fpr,tpr\n";
  for (const auto& [fpr, tpr] : points)
    os << detail::format_double(fpr) << "," << detail::format_double(tpr)
       << "\n";
  if (!os) throw data_error("write failed for " + path);
}

inline void save_sr_points_csv(
    const std::vector<std::pair<double, double>>& points,
    const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open " + path + " for writing");
  os << "similarity_ratio,auc_improvement\n";
  for (const auto& [sr, imp] : points)
    os << detail::format_double(sr) << "," << detail::format_double(imp)
       << "\n";
  if (!os) throw data_error("write failed for " + path);
}

}  // namespace vager
