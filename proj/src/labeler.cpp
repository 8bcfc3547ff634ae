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

#include "otrlab/labeler.hpp"

#include <json.hpp>

#include "otrlab/error.hpp"

namespace otr {

void ValidateTrajectory(const Trajectory& t) {
  const std::string who = "trajectory '" + t.episode_id + "': ";
  Require(t.states.rows() >= 1 && t.states.cols() >= 1, ErrorKind::kData, who + "no states");
  Require(t.actions.rows() == t.states.rows() - 1, ErrorKind::kData,
          who + "expected " + std::to_string(t.states.rows() - 1) + " actions, got " +
              std::to_string(t.actions.rows()));
  Require(t.states.allFinite() && t.actions.allFinite(), ErrorKind::kData,
          who + "non-finite state or action");
  if (t.rewards) {
    Require(t.rewards->size() == t.states.rows() - 1, ErrorKind::kData,
            who + "reward count does not match transition count");
    Require(t.rewards->allFinite(), ErrorKind::kData, who + "non-finite reward");
  }
}

}  // namespace otr

namespace otr::labeler {

RewardAssignment LabelAgainstExpert(const Trajectory& unlabeled, const Trajectory& expert,
                                    const OtConfig& config) {
  Require(unlabeled.length() > 0 && expert.length() > 0, ErrorKind::kDimension,
          "labeling needs nonempty trajectories");
  Require(unlabeled.state_dim() == expert.state_dim(), ErrorKind::kDimension,
          "state dimension mismatch between '" + unlabeled.episode_id + "' and expert '" +
              expert.episode_id + "'");
  const auto prep = [&](const Eigen::MatrixXd& s) {
    return config.standardizer ? config.standardizer->Apply(s) : s;
  };
  const ot::CostMatrix cost = ot::BuildCostMatrix(ot::EmpiricalDistribution(prep(unlabeled.states)),
                                                  ot::EmpiricalDistribution(prep(expert.states)),
                                                  config.metric);
  ot::OtResult plan;
  try {
    plan = config.solver == ot::Solver::kExact ? ot::ExactOt(cost)
                                               : ot::Sinkhorn(cost, config.sinkhorn);
  } catch (const Error& e) {
    Fail(ErrorKind::kLabeling,
         "episode '" + unlabeled.episode_id + "': optimal transport failed: " + e.what());
  }
  RewardAssignment out;
  out.raw = -cost.entries().cwiseProduct(plan.plan.coupling).rowwise().sum();
  out.raw_return = out.raw.sum();
  out.source_expert_id = expert.episode_id;
  out.converged = plan.converged;
  out.marginal_violation = plan.marginal_violation;
  return out;
}

RewardAssignment SelectBestExpert(const Trajectory& unlabeled,
                                  std::span<const Trajectory> experts,
                                  const OtConfig& config) {
  Require(!experts.empty(), ErrorKind::kLabeling, "no expert demonstrations given");
  std::optional<RewardAssignment> best;
  std::string last_error;
  for (std::size_t k = 0; k < experts.size(); ++k) {
    RewardAssignment candidate;
    try {
      candidate = LabelAgainstExpert(unlabeled, experts[k], config);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kDimension) throw;
      last_error = e.what();
      continue;
    }
    candidate.source_expert = static_cast<int>(k);
    if (!best || candidate.raw_return > best->raw_return) best = std::move(candidate);
  }
  if (!best)
    Fail(ErrorKind::kLabeling,
         "episode '" + unlabeled.episode_id + "': all experts failed (" + last_error + ")");
  return *best;
}

RewardAssignment SquashRewards(RewardAssignment a, double alpha, double beta) {
  Require(alpha > 0.0, ErrorKind::kConfig, "squash alpha must be > 0");
  a.squashed = a.raw.unaryExpr([&](double r) { return Squash(r, alpha, beta); });
  a.squashed_return = a.squashed.sum();
  return a;
}

LabeledOutput LabelDataset(std::span<const Trajectory> experts,
                           std::span<const Trajectory> unlabeled, const LabelConfig& config) {
  Require(!experts.empty(), ErrorKind::kContract, "labeling needs at least one expert");
  Require(!unlabeled.empty(), ErrorKind::kContract, "labeling needs at least one trajectory");
  const Eigen::Index dim = experts.front().state_dim();
  for (const auto& t : experts) {
    ValidateTrajectory(t);
    Require(t.state_dim() == dim, ErrorKind::kDimension, "expert state dimensions differ");
  }
  for (const auto& t : unlabeled) {
    ValidateTrajectory(t);
    Require(t.state_dim() == dim, ErrorKind::kDimension,
            "unlabeled trajectory '" + t.episode_id + "' has state dimension " +
                std::to_string(t.state_dim()) + ", experts have " + std::to_string(dim));
  }

  OtConfig ot_config = config.ot;
  if (config.standardize && !ot_config.standardizer) {
    // Fit over every state being compared. Expert-only statistics make the
    // tracking-error features nearly constant and blow up costs elsewhere.
    Eigen::Index rows = 0;
    for (const auto& t : experts) rows += t.length();
    for (const auto& t : unlabeled) rows += t.length();
    Eigen::MatrixXd all(rows, dim);
    Eigen::Index at = 0;
    for (auto group : {experts, unlabeled}) {
      for (const auto& t : group) {
        all.middleRows(at, t.length()) = t.states;
        at += t.length();
      }
    }
    ot_config.standardizer = ot::Standardizer::Fit(all);
  }

  LabeledOutput out;
  std::size_t failures = 0;
  for (const auto& t : unlabeled) {
    LabelReportEntry entry;
    entry.episode_id = t.episode_id;
    try {
      const RewardAssignment a =
          SquashRewards(SelectBestExpert(t, experts, ot_config), config.alpha, config.beta);
      Trajectory labeled = t;
      labeled.rewards = a.squashed.head(t.transitions());
      out.trajectories.push_back(std::move(labeled));
      entry.source_expert = a.source_expert;
      entry.source_expert_id = a.source_expert_id;
      entry.raw_return = a.raw_return;
      entry.squashed_return = a.squashed_return;
      entry.converged = a.converged;
      entry.marginal_violation = a.marginal_violation;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kLabeling) throw;
      entry.failed = true;
      entry.error = e.what();
      ++failures;
    }
    out.report.push_back(std::move(entry));
  }
  const double fraction = static_cast<double>(failures) / static_cast<double>(unlabeled.size());
  Require(fraction <= config.max_failure_fraction, ErrorKind::kLabeling,
          std::to_string(failures) + " of " + std::to_string(unlabeled.size()) +
              " trajectories failed to label");
  return out;
}

std::string ReportJson(const std::vector<LabelReportEntry>& report) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : report) {
    nlohmann::json row = {{"episode_id", e.episode_id}, {"failed", e.failed}};
    if (e.failed) {
      row["error"] = e.error;
    } else {
      row["source_expert"] = e.source_expert;
      row["source_expert_id"] = e.source_expert_id;
      row["raw_return"] = e.raw_return;
      row["squashed_return"] = e.squashed_return;
      row["converged"] = e.converged;
      row["marginal_violation"] = e.marginal_violation;
    }
    j.push_back(std::move(row));
  }
  return j.dump(2);
}

}  // namespace otr::labeler
