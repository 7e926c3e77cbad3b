#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vager/errors.hpp"
#include "vager/features.hpp"

namespace vager {

enum class FeatureFormat { csv, binary };

namespace detail {

// Shortest round-trippable decimal for a double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  // Prefer shorter forms when they round-trip exactly.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[32];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    std::sscanf(shorter, "%lf", &back);
    if (back == v) return shorter;
  }
  return buf;
}

inline double parse_double(const std::string& tok, std::size_t line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw data_error("line " + std::to_string(line_no) +
                     ": malformed number '" + tok + "'");
  }
}

inline std::int64_t parse_int(const std::string& tok, std::size_t line_no) {
  std::int64_t v = 0;
  const auto [ptr, ec] =
      std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw data_error("line " + std::to_string(line_no) +
                     ": malformed integer '" + tok + "'");
  return v;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const char* what) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw data_error(std::string("truncated file reading ") + what);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace detail

// CSV layout: header "class_id,sample_id,f0,...,f{d-1}", one record per line.
inline void save_features_csv(const FeatureSet& fs, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open " + path + " for writing");
  os << "class_id,sample_id";
  for (int j = 0; j < fs.d; ++j) os << ",f" << j;
  os << "\n";
  for (const auto& r : fs.records) {
    os << r.class_id << "," << r.sample_id;
    for (int j = 0; j < fs.d; ++j) os << "," << detail::format_double(r.x[j]);
    os << "\n";
  }
  if (!os) throw data_error("write failed for " + path);
}

inline FeatureSet load_features_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw data_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "class_id" || header[1] != "sample_id")
    throw data_error(path + ": bad header, expected class_id,sample_id,f0,...");
  FeatureSet fs;
  fs.d = static_cast<int>(header.size()) - 2;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto toks = detail::split_csv_line(line);
    if (toks.size() != header.size())
      throw data_error(path + ": line " + std::to_string(line_no) + ": " +
                       std::to_string(toks.size()) + " fields, expected " +
                       std::to_string(header.size()));
    FeatureRecord r;
    r.class_id = detail::parse_int(toks[0], line_no);
    r.sample_id = detail::parse_int(toks[1], line_no);
    r.x.resize(fs.d);
    for (int j = 0; j < fs.d; ++j)
      r.x[j] = detail::parse_double(toks[2 + j], line_no);
    fs.records.push_back(std::move(r));
  }
  fs.validate();
  return fs;
}

// Binary layout: "VAGF", u32 version=1, u64 count, u32 d, then records as
// (u64 class_id, u64 sample_id, d little-endian f64).
inline void save_features_binary(const FeatureSet& fs,
                                 const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw data_error("cannot open " + path + " for writing");
  os.write("VAGF", 4);
  detail::write_le<std::uint32_t>(os, 1);
  detail::write_le<std::uint64_t>(os, fs.records.size());
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(fs.d));
  for (const auto& r : fs.records) {
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(r.class_id));
    detail::write_le<std::uint64_t>(os,
                                    static_cast<std::uint64_t>(r.sample_id));
    for (int j = 0; j < fs.d; ++j) detail::write_le<double>(os, r.x[j]);
  }
  if (!os) throw data_error("write failed for " + path);
}

inline FeatureSet load_features_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw data_error("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "VAGF", 4) != 0)
    throw data_error(path + ": bad magic, not a VAGF feature file");
  const auto version = detail::read_le<std::uint32_t>(is, "version");
  if (version != 1)
    throw data_error(path + ": unsupported version " +
                     std::to_string(version));
  const auto count = detail::read_le<std::uint64_t>(is, "record count");
  const auto d = detail::read_le<std::uint32_t>(is, "dimension");
  FeatureSet fs;
  fs.d = static_cast<int>(d);
  fs.records.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    FeatureRecord r;
    r.class_id = static_cast<std::int64_t>(
        detail::read_le<std::uint64_t>(is, "class_id"));
    r.sample_id = static_cast<std::int64_t>(
        detail::read_le<std::uint64_t>(is, "sample_id"));
    r.x.resize(fs.d);
    for (int j = 0; j < fs.d; ++j)
      r.x[j] = detail::read_le<double>(is, "feature value");
    fs.records.push_back(std::move(r));
  }
  fs.validate();
  return fs;
}

inline FeatureSet load_features(const std::string& path, FeatureFormat fmt) {
  return fmt == FeatureFormat::csv ? load_features_csv(path)
                                   : load_features_binary(path);
}

inline void save_features(const FeatureSet& fs, const std::string& path,
                          FeatureFormat fmt) {
  if (fmt == FeatureFormat::csv)
    save_features_csv(fs, path);
  else
    save_features_binary(fs, path);
}

}  // namespace vager
