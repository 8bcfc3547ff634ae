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

// Implicit Q-learning on a fixed, labeled transition dataset: expectile
// regression for V, twin critics regressed onto r + gamma * (1 - done) * V(s'),
// and advantage-weighted regression for a Gaussian policy.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "otrlab/dataset.hpp"
#include "otrlab/nn.hpp"

namespace otr::iql {

inline constexpr double kWeightClamp = 100.0;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

struct IqlConfig {
  double gamma = 0.99;
  double tau = 0.005;
  int batch_size = 256;
  double learning_rate = 3e-4;
  double expectile = 0.7;
  double awr_temperature = 3.0;  // weight = exp(A / temperature)
  int gradient_steps = 50000;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {256, 256};
  int eval_interval = 10000;
  // When false the last transition of each episode still bootstraps from
  // V(s'); episodes of a time-limited task are truncated, not terminated.
  bool episode_end_is_terminal = false;
  // Per-component action bound; empty means the largest |action| in the data.
  std::vector<double> action_scale;

  void Validate() const;  // kConfig on out-of-range values
};

// Policy with its input/output normalization. Means are tanh-squashed in
// normalized action space; log_std is state independent.
struct GaussianPolicy {
  nn::MlpParams net;
  Eigen::VectorXd log_std;
  Eigen::VectorXd state_mean;
  Eigen::VectorXd state_scale;
  Eigen::VectorXd action_scale;

  int state_dim() const { return static_cast<int>(state_mean.size()); }
  int action_dim() const { return static_cast<int>(action_scale.size()); }
};

struct IqlNets {
  nn::MlpParams q1, q2, q1_target, q2_target, value;
  GaussianPolicy policy;
  nn::AdamState q1_opt, q2_opt, value_opt, policy_opt;
  Eigen::ArrayXd log_std_m, log_std_v;
  std::int64_t log_std_steps = 0;
};

// State statistics come from the dataset; action_scale is the per-component
// action bound.
IqlNets InitNets(const IqlConfig& config, const Eigen::VectorXd& state_mean,
                 const Eigen::VectorXd& state_scale, const Eigen::VectorXd& action_scale);

struct ValueLoss {
  double loss = 0.0;
  nn::MlpGradients value;
};
struct CriticLoss {
  double loss = 0.0;
  nn::MlpGradients q1, q2;
};
struct PolicyLoss {
  double loss = 0.0;
  nn::MlpGradients policy;
  Eigen::VectorXd log_std;
};

// Batches are in raw units; normalization happens inside.
ValueLoss ComputeValueLoss(const IqlNets& nets, const data::TransitionBatch& batch, double expectile);
CriticLoss ComputeCriticLoss(const IqlNets& nets, const data::TransitionBatch& batch, double gamma);
PolicyLoss ComputePolicyLoss(const IqlNets& nets, const data::TransitionBatch& batch,
                             double awr_temperature);

struct StepLosses {
  double value = 0.0;
  double critic = 0.0;
  double policy = 0.0;
};

// One V -> Q -> policy update followed by the target soft update.
StepLosses UpdateStep(IqlNets& nets, const data::TransitionBatch& batch, const IqlConfig& config);

// Deterministic mode returns the squashed mean; stochastic mode samples in
// normalized space and clips to the bounds.
Eigen::VectorXd Act(const GaussianPolicy& policy, const Eigen::VectorXd& state,
                    bool deterministic, std::mt19937_64* rng = nullptr);

void SavePolicy(const std::string& path, const GaussianPolicy& policy);
GaussianPolicy LoadPolicy(const std::string& path);

struct EvalResult {
  double return_mean = 0.0;
  double return_std = 0.0;
  double steps_mean = 0.0;
  double normalized = 0.0;
};

struct MetricsRow {
  int step = 0;
  StepLosses losses;
  EvalResult eval;
};

std::string MetricsCsvHeader();
std::string MetricsCsvRow(const MetricsRow& row);

// Called at step 0 and every eval_interval steps; the trainer itself never
// touches an environment.
using Evaluator = std::function<EvalResult(const GaussianPolicy&, int step)>;

struct TrainResult {
  IqlNets nets;
  std::vector<MetricsRow> metrics;
};

// When out_dir is non-empty, writes metrics.csv, config.json, a policy
// checkpoint per evaluation, and every network at the end. A numerical
// failure aborts with the step index; earlier checkpoints stay on disk.
TrainResult Train(const IqlConfig& config, const data::Dataset& labeled, const Evaluator& evaluator,
                  const std::string& out_dir = "");

}  // namespace otr::iql
