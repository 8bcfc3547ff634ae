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

// Trajectory datasets on disk: `<base>.traj` holds length-prefixed binary
// episode records, `<base>.manifest` is JSON metadata, and the optional
// `<base>.gt.json` sidecar keeps ground-truth returns for evaluation only.

#include <Eigen/Dense>
#include <cstdint>
#include <json.hpp>
#include <random>
#include <string>
#include <vector>

#include "otrlab/env.hpp"
#include "otrlab/trajectory.hpp"

namespace otr::data {

enum class RewardStatus { kLabeled, kStripped, kGroundTruth };
const char* RewardStatusName(RewardStatus status);
RewardStatus ParseRewardStatus(const std::string& name);

inline constexpr int kSchemaVersion = 1;

struct Manifest {
  int schema_version = kSchemaVersion;
  std::string env_tag;
  int state_dim = 0;
  int action_dim = 0;
  int episode_count = 0;
  int horizon = 0;  // longest episode, in transitions
  std::vector<std::uint64_t> generator_seeds;
  RewardStatus reward_status = RewardStatus::kStripped;
  nlohmann::json generator = nlohmann::json::object();  // provenance notes
  std::string traj_checksum;  // FNV-1a 64 of the .traj file, filled on write
};

struct Dataset {
  Manifest manifest;
  std::vector<Trajectory> episodes;
};

// Recomputes counts and dims from the episodes and checks reward presence
// against reward_status.
void SyncManifest(Dataset& dataset);
void ValidateDataset(const Dataset& dataset);

// `base` may be given with or without the .traj / .manifest suffix.
std::string BasePath(const std::string& path);
void WriteDataset(const std::string& base, Dataset dataset);
Dataset ReadDataset(const std::string& base);
nlohmann::json ExportJson(const Dataset& dataset);

// Returns the dataset with rewards removed. A dataset that is already
// stripped comes back unchanged with *was_noop set.
Dataset StripRewards(const Dataset& dataset, bool* was_noop = nullptr);

struct GroundTruth {
  std::vector<std::string> episode_ids;
  std::vector<double> returns;
  int horizon = 0;
  nlohmann::json episode_notes = nlohmann::json::array();
};

std::string SidecarPath(const std::string& base);
void WriteGroundTruth(const std::string& base, const GroundTruth& truth);
GroundTruth ReadGroundTruth(const std::string& base);

// Mean of clamp(return / horizon, 0, 1).
double MeanNormalizedReturn(const std::vector<double>& returns, int horizon);

struct CorpusConfig {
  int expert_episodes = 10;
  int unlabeled_episodes = 100;
  std::uint64_t seed = 0;
  // Unlabeled mixture: Gaussian action noise with std sigma * bound, plus
  // held uniform-random action segments covering about `fraction` of steps.
  std::vector<double> noise_sigmas = {0.1, 0.3};
  std::vector<double> random_fractions = {0.0, 0.2, 0.4, 0.6};
  int segment_min = 10;
  int segment_max = 40;
};

struct CorpusSummary {
  std::string expert_base;
  std::string unlabeled_base;
  double expert_mean_normalized = 0.0;
  double behavior_mean_normalized = 0.0;
};

CorpusSummary GenerateCorpus(const env::EnvConfig& env_config, const CorpusConfig& config,
                             const std::string& expert_base, const std::string& unlabeled_base);

// Flat transition arrays. dones is 1.0 on the last transition of each
// episode and 0.0 elsewhere.
struct TransitionBatch {
  Eigen::MatrixXd states;
  Eigen::MatrixXd actions;
  Eigen::MatrixXd next_states;
  Eigen::VectorXd rewards;
  Eigen::VectorXd dones;

  Eigen::Index size() const { return states.rows(); }
};

// Requires reward_status == labeled.
TransitionBatch BuildTransitions(const Dataset& dataset);
TransitionBatch SampleBatch(const TransitionBatch& transitions, std::mt19937_64& rng, int size);

std::uint64_t Fnv1a64(const void* data, std::size_t n, std::uint64_t hash = 0xcbf29ce484222325ull);
std::string FileChecksum(const std::string& path);

std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

}  // namespace otr::data
