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

#pragma once

// Optimal-transport reward labeling. Each unlabeled trajectory is aligned to
// every expert demonstration; state t receives
//
//   r(s_t) = - sum_t' C(t, t') * mu*(t, t')
//
// from the best-matching expert (highest episodic return), and rewards are
// squashed with s(r) = alpha * exp(beta * r) before training.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otrlab/ot.hpp"
#include "otrlab/trajectory.hpp"

namespace otr::labeler {

struct OtConfig {
  ot::Metric metric = ot::Metric::kSquaredEuclidean;
  ot::Solver solver = ot::Solver::kSinkhorn;
  ot::SinkhornOptions sinkhorn;
  // Applied to both trajectories before computing costs when set.
  std::optional<ot::Standardizer> standardizer;
};

struct RewardAssignment {
  Eigen::VectorXd raw;       // one per state, <= 0
  Eigen::VectorXd squashed;  // empty until SquashRewards
  int source_expert = -1;    // index into the expert list
  std::string source_expert_id;
  double raw_return = 0.0;
  double squashed_return = 0.0;
  bool converged = true;
  double marginal_violation = 0.0;
};

RewardAssignment LabelAgainstExpert(const Trajectory& unlabeled, const Trajectory& expert,
                                    const OtConfig& config);

// Ties go to the lowest expert index. Individual expert failures are skipped;
// if every expert fails a kLabeling error names the episode.
RewardAssignment SelectBestExpert(const Trajectory& unlabeled,
                                  std::span<const Trajectory> experts,
                                  const OtConfig& config);

inline double Squash(double raw, double alpha, double beta) {
  return alpha * std::exp(beta * raw);
}

RewardAssignment SquashRewards(RewardAssignment assignment, double alpha, double beta);

struct LabelConfig {
  OtConfig ot;
  double alpha = 5.0;
  double beta = 1.0;
  // Fit the standardizer over all expert and unlabeled states (ignored if
  // ot.standardizer is already set).
  bool standardize = true;
  double max_failure_fraction = 0.1;
};

struct LabelReportEntry {
  std::string episode_id;
  bool failed = false;
  std::string error;
  int source_expert = -1;
  std::string source_expert_id;
  double raw_return = 0.0;
  double squashed_return = 0.0;
  bool converged = true;
  double marginal_violation = 0.0;
};

struct LabeledOutput {
  std::vector<Trajectory> trajectories;  // failures skipped, order preserved
  std::vector<LabelReportEntry> report;  // one entry per input trajectory
};

// Attaches squashed rewards per transition: transition t gets r(s_t) and the
// final state's reward is dropped. Aborts with kLabeling when more than
// max_failure_fraction of the trajectories fail.
LabeledOutput LabelDataset(std::span<const Trajectory> experts,
                           std::span<const Trajectory> unlabeled, const LabelConfig& config);

std::string ReportJson(const std::vector<LabelReportEntry>& report);

}  // namespace otr::labeler
