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
#include <json.hpp>
#include <memory>
#include <random>

#include "otrlab/error.hpp"
#include "otrlab/harness.hpp"

namespace otr::harness {

PolicyFn MakePolicy(const env::EnvConfig& config, const std::string& source, std::uint64_t seed) {
  if (source == "expert") {
    return [config](const env::Observation& o) { return env::ScriptedExpert(config, o); };
  }
  if (source == "random") {
    auto rng = std::make_shared<std::mt19937_64>(data::DeriveSeed(seed, 40, 0));
    const Eigen::Vector3d bound = env::ActionBounds(config);
    return [rng, bound](const env::Observation&) {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      Eigen::Vector3d a;
      for (int k = 0; k < 3; ++k) a(k) = bound(k) * u(*rng);
      return env::Action::FromVector(a);
    };
  }
  auto policy = std::make_shared<iql::GaussianPolicy>(iql::LoadPolicy(source));
  Require(policy->state_dim() == env::kStateDim && policy->action_dim() == env::Action::kDim,
          ErrorKind::kDimension,
          "checkpoint " + source + " maps " + std::to_string(policy->state_dim()) + " -> " +
              std::to_string(policy->action_dim()) + ", environment needs " +
              std::to_string(env::kStateDim) + " -> " + std::to_string(env::Action::kDim));
  return [policy](const env::Observation& o) {
    return env::Action::FromVector(iql::Act(*policy, env::StateVector(o), true));
  };
}

EvalRecord EvaluatePolicy(const env::EnvConfig& config, const PolicyFn& policy, int episodes,
                          std::uint64_t seed) {
  Require(episodes >= 1, ErrorKind::kConfig, "evaluation needs at least one episode");
  EvalRecord r;
  r.seed = seed;
  for (int k = 0; k < episodes; ++k) {
    const Trajectory t = env::RolloutEpisode(config, policy, data::DeriveSeed(seed, 30, k),
                                             "eval-" + std::to_string(k));
    r.returns.push_back(t.rewards->sum());
    r.steps.push_back(static_cast<int>(t.transitions()));
  }
  double sum = 0.0, steps = 0.0;
  for (int k = 0; k < episodes; ++k) {
    sum += r.returns[k];
    steps += r.steps[k];
  }
  r.return_mean = sum / episodes;
  r.steps_mean = steps / episodes;
  double var = 0.0;
  for (double x : r.returns) var += (x - r.return_mean) * (x - r.return_mean);
  r.return_std = std::sqrt(var / episodes);
  r.normalized = data::MeanNormalizedReturn(r.returns, config.horizon);
  return r;
}

EvalRecord EvaluateCheckpoint(const std::string& checkpoint, const env::EnvConfig& config,
                              int episodes, std::uint64_t seed) {
  return EvaluatePolicy(config, MakePolicy(config, checkpoint, seed), episodes, seed);
}

std::string EvalRecordJson(const EvalRecord& r) {
  return nlohmann::json{{"seed", r.seed},
                        {"step", r.step},
                        {"return_mean", r.return_mean},
                        {"return_std", r.return_std},
                        {"episode_steps_mean", r.steps_mean},
                        {"normalized_return", r.normalized},
                        {"returns", r.returns},
                        {"episode_steps", r.steps}}
      .dump(2);
}

data::Dataset Rollout(const env::EnvConfig& config, const std::string& source, int episodes,
                      std::uint64_t seed) {
  Require(episodes >= 1, ErrorKind::kConfig, "rollout needs at least one episode");
  const PolicyFn policy = MakePolicy(config, source, seed);
  data::Dataset d;
  d.manifest.reward_status = data::RewardStatus::kGroundTruth;
  d.manifest.env_tag = env::kEnvTag;
  d.manifest.generator = {{"policy", source}, {"seed", seed}};
  for (int k = 0; k < episodes; ++k) {
    const std::uint64_t s = data::DeriveSeed(seed, 50, k);
    char id[32];
    std::snprintf(id, sizeof id, "rollout-%04d", k);
    d.episodes.push_back(env::RolloutEpisode(config, policy, s, id));
    d.manifest.generator_seeds.push_back(s);
  }
  data::SyncManifest(d);
  return d;
}

}  // namespace otr::harness
