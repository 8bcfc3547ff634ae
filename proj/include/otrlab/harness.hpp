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

// Experiment orchestration: configuration, policy evaluation, path plots,
// per-seed and aggregate metrics, and the staged gen -> label -> train ->
// eval -> report pipeline with artifact-based resume.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "otrlab/dataset.hpp"
#include "otrlab/env.hpp"
#include "otrlab/iql.hpp"
#include "otrlab/labeler.hpp"
#include "otrlab/trajectory.hpp"

namespace otr::harness {

inline const std::vector<std::string> kAllStages = {"gen", "label", "train", "eval", "report"};

struct ExperimentConfig {
  std::string profile = "desk";
  env::EnvConfig env;
  data::CorpusConfig corpus;
  labeler::LabelConfig label;
  iql::IqlConfig iql;
  std::vector<std::string> stages = kAllStages;
  std::vector<std::uint64_t> seeds;
  int eval_episodes = 10;
  std::string output_dir = "runs/desk";

  void Validate() const;  // kConfig
};

// "desk": horizon 200, 50k steps, 64x64 nets, 3 seeds.
// "full": horizon 500, 1M steps, 256x256 nets, 10 seeds.
ExperimentConfig Profile(const std::string& name);

// Keys absent from the JSON keep the profile's value ("profile" picks the
// base, default desk). Unknown keys are rejected.
ExperimentConfig ParseConfig(const std::string& json_text);
ExperimentConfig LoadConfig(const std::string& path);
std::string ConfigToJson(const ExperimentConfig& config);

// Dotted key such as "iql.gradient_steps"; value is JSON text, with bare
// words accepted as strings.
void ApplyOverride(ExperimentConfig& config, const std::string& key, const std::string& value);

using PolicyFn = std::function<env::Action(const env::Observation&)>;

// source is "expert", "random" or a policy checkpoint path. The random policy
// draws uniformly inside the action bounds from a stream seeded by `seed`.
PolicyFn MakePolicy(const env::EnvConfig& config, const std::string& source, std::uint64_t seed);

struct EvalRecord {
  std::uint64_t seed = 0;
  int step = 0;
  double return_mean = 0.0;
  double return_std = 0.0;
  double steps_mean = 0.0;
  double normalized = 0.0;
  std::vector<double> returns;
  std::vector<int> steps;
};

// Episode k uses env seed DeriveSeed(seed, 30, k).
EvalRecord EvaluatePolicy(const env::EnvConfig& config, const PolicyFn& policy, int episodes,
                          std::uint64_t seed);
// kDimension when the checkpoint does not match the environment.
EvalRecord EvaluateCheckpoint(const std::string& checkpoint, const env::EnvConfig& config,
                              int episodes, std::uint64_t seed);
std::string EvalRecordJson(const EvalRecord& record);

// Ground-truth rollouts of `source`, reward_status ground_truth.
data::Dataset Rollout(const env::EnvConfig& config, const std::string& source, int episodes,
                      std::uint64_t seed);

struct PathsSvg {
  std::string svg;
  std::vector<double> mean_distance;  // camera centre to cube, per panel
  double overall_mean_distance = 0.0;
};

// One panel per trajectory: cube positions as squares, camera centre as
// circles. kData on an empty list or mixed env tags.
PathsSvg RenderPaths(const std::vector<Trajectory>& trajectories);
// Writes only after rendering succeeded.
PathsSvg WritePaths(const std::vector<Trajectory>& trajectories, const std::string& path);

// Columns reduced across seeds, in this order.
inline const std::vector<std::string> kAggregateStatistics = {
    "value_loss",         "critic_loss", "policy_loss",      "eval_return_mean",
    "eval_return_std",    "eval_episode_steps", "normalized_return"};

// Rows "step,statistic,mean,std,n" for every step present in any input,
// population std. Inputs are per-seed metrics CSVs.
std::string AggregateCsv(const std::vector<std::string>& metrics_csvs);

struct ReportRow {
  std::string label;
  double mean = 0.0;
  double std = 0.0;
  int n = 0;
  bool published = false;  // quoted constants, not produced here
};

struct Report {
  std::vector<ReportRow> rows;
  std::string text;
};

// Final-step normalized return of each aggregate, followed by the published
// reference rows.
Report MakeReport(const std::vector<std::string>& aggregate_csvs);
inline const std::vector<ReportRow> kPublishedRows = {
    {"OTR + IQL (published)", 0.81, 0.08, 0, true},
    {"SAC (published)", 0.79, 0.08, 0, true},
    {"DDPG (published)", 0.67, 0.08, 0, true}};

// Reads both datasets (ground-truth rewards are dropped before labeling),
// writes <out_base>.traj/.manifest with reward_status labeled and, when
// report_path is non-empty, the per-episode labeling report.
labeler::LabeledOutput LabelFiles(const std::string& expert_path,
                                  const std::string& unlabeled_path, const std::string& out_base,
                                  const labeler::LabelConfig& config,
                                  const std::string& report_path = "");

// One training seed with periodic evaluation injected from outside the
// trainer. An empty iql.action_scale means the environment's action bounds.
iql::TrainResult TrainSeed(const ExperimentConfig& config, std::uint64_t seed,
                           const std::string& labeled_path, const std::string& out_dir,
                           std::ostream* log = nullptr);

struct RunSummary {
  std::vector<std::string> stages_run;
  std::vector<std::string> stages_skipped;
  std::vector<EvalRecord> final_evals;  // one per seed, from the eval stage
  double mean_normalized = 0.0;
  double std_normalized = 0.0;
  double behavior_mean_normalized = 0.0;
  bool all_full_horizon = false;
  std::string aggregate_path;
};

// Output layout under output_dir:
//   data/{expert,unlabeled,labeled}.*  data/label_report.json
//   seed_<s>/{metrics.csv,config.json,checkpoints/,eval.json}
//   aggregate.csv report.txt summary.json .stamps/
// A failing stage rethrows with the stage named; artifacts are kept.
RunSummary RunExperiment(const ExperimentConfig& config, std::ostream* log = nullptr);

// Process exit status for an error kind.
int ExitCode(ErrorKind kind);

}  // namespace otr::harness
