#include "graybox/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace graybox {

std::string format_double(double value) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

void write_csv(const std::string& path, const TimeSeries& ts, const Provenance& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_csv: cannot open '" + path + "' for writing");
  out << "# config_digest=" << provenance.config_digest << " seed=" << provenance.seed
      << " dt=" << format_double(ts.dt());
  for (const auto& [k, v] : ts.metadata) {
    if (k == "config_digest" || k == "seed" || k == "dt") continue;
    out << ' ' << k << '=' << v;
  }
  out << '\n' << "time";
  for (const auto& l : ts.labels()) out << ',' << l;
  out << '\n';
  const Mat& values = ts.values();
  for (std::size_t k = 0; k < ts.length(); ++k) {
    out << format_double(ts.time(k));
    for (Eigen::Index c = 0; c < values.cols(); ++c) out << ',' << format_double(values(static_cast<Eigen::Index>(k), c));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_csv: write failed for '" + path + "'");
}

namespace {

double parse_double(const std::string& token, const std::string& path, std::size_t lineno) {
  double v = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw std::runtime_error("read_csv: bad number '" + token + "' at line " + std::to_string(lineno) + " of '" + path + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

}  // namespace

TimeSeries read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_csv: cannot open '" + path + "'");
  std::map<std::string, std::string> meta;
  std::vector<std::string> labels;
  std::vector<double> times;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream fields(line.substr(1));
      std::string kv;
      while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq != std::string::npos) meta[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      continue;
    }
    auto parts = split(line, ',');
    if (labels.empty()) {
      if (parts.empty() || parts[0] != "time") throw std::runtime_error("read_csv: header must start with 'time' in '" + path + "'");
      labels.assign(parts.begin() + 1, parts.end());
      continue;
    }
    if (parts.size() != labels.size() + 1)
      throw std::runtime_error("read_csv: wrong column count at line " + std::to_string(lineno) + " of '" + path + "'");
    times.push_back(parse_double(parts[0], path, lineno));
    std::vector<double> row;
    row.reserve(labels.size());
    for (std::size_t c = 1; c < parts.size(); ++c) row.push_back(parse_double(parts[c], path, lineno));
    rows.push_back(std::move(row));
  }
  if (labels.empty()) throw std::runtime_error("read_csv: no header in '" + path + "'");
  double dt = 0.0;
  if (auto it = meta.find("dt"); it != meta.end()) {
    dt = parse_double(it->second, path, 1);
  } else if (times.size() >= 2) {
    dt = times[1] - times[0];
  } else {
    throw std::runtime_error("read_csv: cannot determine dt for '" + path + "'");
  }
  Mat values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (std::size_t c = 0; c < labels.size(); ++c)
      values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = rows[k][c];
  TimeSeries ts(dt, std::move(labels), std::move(values));
  meta.erase("dt");
  ts.metadata = std::move(meta);
  return ts;
}

}  // namespace graybox
