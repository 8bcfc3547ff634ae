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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "otrlab/error.hpp"
#include "otrlab/harness.hpp"

namespace otr::harness {

namespace {

constexpr int kPanel = 320;
constexpr int kMargin = 24;
constexpr int kColumns = 4;

std::string Escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Fmt(const char* f, double a, double b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

}  // namespace

PathsSvg RenderPaths(const std::vector<Trajectory>& trajectories) {
  Require(!trajectories.empty(), ErrorKind::kData, "no trajectories to render");
  const std::string tag = trajectories.front().env_tag;
  double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x, lo_y = lo_x, hi_y = -lo_x;
  for (const Trajectory& t : trajectories) {
    Require(t.env_tag == tag, ErrorKind::kData,
            "mixed environments: '" + t.env_tag + "' vs '" + tag + "'");
    Require(t.state_dim() == env::kStateDim && t.length() >= 1, ErrorKind::kData,
            "trajectory " + t.episode_id + " does not carry camera and cube positions");
    for (int c : {0, 4}) {
      lo_x = std::min(lo_x, t.states.col(c).minCoeff());
      hi_x = std::max(hi_x, t.states.col(c).maxCoeff());
      lo_y = std::min(lo_y, t.states.col(c + 1).minCoeff());
      hi_y = std::max(hi_y, t.states.col(c + 1).maxCoeff());
    }
  }
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-6}) * 1.1;
  const double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
  const double inner = kPanel - 2 * kMargin;

  const int n = static_cast<int>(trajectories.size());
  const int cols = std::min(n, kColumns), rows = (n + kColumns - 1) / kColumns;
  PathsSvg out;
  std::string& s = out.svg;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(cols * kPanel) +
       "\" height=\"" + std::to_string(rows * kPanel) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const Trajectory& t = trajectories[i];
    const double ox = (i % kColumns) * kPanel + kMargin, oy = (i / kColumns) * kPanel + kMargin;
    auto px = [&](double x) { return ox + inner * (0.5 + (x - cx) / span); };
    auto py = [&](double y) { return oy + inner * (0.5 - (y - cy) / span); };
    double dist = 0.0;
    for (Eigen::Index k = 0; k < t.length(); ++k)
      dist += std::hypot(t.states(k, 0) - t.states(k, 4), t.states(k, 1) - t.states(k, 5));
    dist /= static_cast<double>(t.length());
    out.mean_distance.push_back(dist);
    total += dist;

    s += "<g>\n<rect x=\"" + std::to_string(ox - kMargin + 2) + "\" y=\"" +
         std::to_string(oy - kMargin + 2) + "\" width=\"" + std::to_string(kPanel - 4) +
         "\" height=\"" + std::to_string(kPanel - 4) + "\" fill=\"none\" stroke=\"#999\"/>\n";
    s += "<text x=\"" + std::to_string(ox) + "\" y=\"" + std::to_string(oy - 6) +
         "\" font-size=\"11\" font-family=\"sans-serif\">" + Escape(t.episode_id) +
         Fmt(" (mean distance %.4f)", dist, 0.0) + "</text>\n";
    for (Eigen::Index k = 0; k < t.length(); ++k) {
      s += "<rect x=\"" + Fmt("%.2f\" y=\"%.2f", px(t.states(k, 4)) - 2, py(t.states(k, 5)) - 2) +
           "\" width=\"4\" height=\"4\" fill=\"blue\" fill-opacity=\"0.5\"/>\n";
    }
    for (Eigen::Index k = 0; k < t.length(); ++k) {
      s += "<circle cx=\"" + Fmt("%.2f\" cy=\"%.2f", px(t.states(k, 0)), py(t.states(k, 1))) +
           "\" r=\"1.6\" fill=\"red\" fill-opacity=\"0.6\"/>\n";
    }
    s += "</g>\n";
  }
  s += "</svg>\n";
  out.overall_mean_distance = total / n;
  return out;
}

PathsSvg WritePaths(const std::vector<Trajectory>& trajectories, const std::string& path) {
  PathsSvg out = RenderPaths(trajectories);
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  Require(f.good(), ErrorKind::kIo, "cannot write " + path);
  f << out.svg;
  Require(f.good(), ErrorKind::kIo, "write failed for " + path);
  return out;
}

}  // namespace otr::harness
