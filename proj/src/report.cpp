// Copyright 2026 The otrlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "otrlab/error.hpp"
#include "otrlab/harness.hpp"

namespace otr::harness {

namespace {

std::vector<std::string> Split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double ParseNumber(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  Fail(ErrorKind::kData, "bad number '" + s + "' in " + where);
}

std::vector<std::vector<std::string>> ReadCsv(const std::string& path, const std::string& header) {
  std::ifstream in(path);
  Require(in.good(), ErrorKind::kIo, "cannot read " + path);
  std::string line;
  Require(static_cast<bool>(std::getline(in, line)) && line == header, ErrorKind::kData,
          path + " does not start with the expected header");
  const std::size_t width = Split(header).size();
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = Split(line);
    Require(cells.size() == width, ErrorKind::kData, "ragged row in " + path + ": " + line);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

constexpr const char* kAggregateHeader = "step,statistic,mean,std,n";

}  // namespace

std::string AggregateCsv(const std::vector<std::string>& metrics_csvs) {
  Require(!metrics_csvs.empty(), ErrorKind::kData, "no metrics files to aggregate");
  const std::size_t stats = kAggregateStatistics.size();
  // step -> statistic -> values in input order
  std::map<int, std::vector<std::vector<double>>> table;
  for (const std::string& path : metrics_csvs) {
    for (const auto& row : ReadCsv(path, iql::MetricsCsvHeader())) {
      const int step = static_cast<int>(ParseNumber(row[0], path));
      auto& slot = table[step];
      slot.resize(stats);
      for (std::size_t k = 0; k < stats; ++k) slot[k].push_back(ParseNumber(row[k + 1], path));
    }
  }
  std::string out = std::string(kAggregateHeader) + "\n";
  for (const auto& [step, columns] : table) {
    for (std::size_t k = 0; k < stats; ++k) {
      const auto& v = columns[k];
      double mean = 0.0, var = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      for (double x : v) var += (x - mean) * (x - mean);
      out += std::to_string(step) + "," + kAggregateStatistics[k] + "," + Num(mean) + "," +
             Num(std::sqrt(var / static_cast<double>(v.size()))) + "," +
             std::to_string(v.size()) + "\n";
    }
  }
  return out;
}

Report MakeReport(const std::vector<std::string>& aggregate_csvs) {
  Require(!aggregate_csvs.empty(), ErrorKind::kData, "empty report: no aggregate files given");
  Report report;
  for (const std::string& path : aggregate_csvs) {
    ReportRow best;
    int best_step = -1;
    for (const auto& row : ReadCsv(path, kAggregateHeader)) {
      if (row[1] != "normalized_return") continue;
      const int step = static_cast<int>(ParseNumber(row[0], path));
      const int n = static_cast<int>(ParseNumber(row[4], path));
      if (n < 1 || step < best_step) continue;
      best_step = step;
      best.mean = ParseNumber(row[2], path);
      best.std = ParseNumber(row[3], path);
      best.n = n;
    }
    Require(best_step >= 0, ErrorKind::kData, "empty report: no completed seeds in " + path);
    const std::filesystem::path p(path);
    best.label = p.has_parent_path() ? p.parent_path().filename().string() : p.string();
    if (best.label.empty()) best.label = p.string();
    best.label += " @ step " + std::to_string(best_step);
    report.rows.push_back(best);
  }
  for (const ReportRow& r : kPublishedRows) report.rows.push_back(r);

  std::string& t = report.text;
  char line[160];
  std::snprintf(line, sizeof line, "%-36s %-20s %s\n", "run", "normalized return", "seeds");
  t += line;
  bool divider = false;
  for (const ReportRow& r : report.rows) {
    if (r.published && !divider) {
      t += "-- published reference values, quoted for comparison, not reproduced here --\n";
      divider = true;
    }
    char cell[48];
    std::snprintf(cell, sizeof cell, r.published ? "%.2f +/- %.2f" : "%.4f +/- %.4f", r.mean,
                  r.std);
    std::snprintf(line, sizeof line, "%-36s %-20s %s\n", r.label.c_str(), cell,
                  r.published ? "-" : std::to_string(r.n).c_str());
    t += line;
  }
  return report;
}

}  // namespace otr::harness
