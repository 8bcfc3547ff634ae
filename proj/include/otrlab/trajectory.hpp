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

#include <Eigen/Dense>
#include <optional>
#include <string>

namespace otr {

// One episode: T states, T - 1 actions, and optionally T - 1 transition
// rewards. Transition t is (states[t], actions[t], states[t + 1]).
struct Trajectory {
  Eigen::MatrixXd states;   // T x state_dim
  Eigen::MatrixXd actions;  // (T - 1) x action_dim
  std::optional<Eigen::VectorXd> rewards;
  std::string episode_id;
  std::string env_tag;

  Eigen::Index length() const { return states.rows(); }
  Eigen::Index transitions() const { return states.rows() - 1; }
  Eigen::Index state_dim() const { return states.cols(); }
  Eigen::Index action_dim() const { return actions.cols(); }

  bool operator==(const Trajectory& other) const {
    return states == other.states && actions == other.actions &&
           rewards.has_value() == other.rewards.has_value() &&
           (!rewards || *rewards == *other.rewards) && episode_id == other.episode_id &&
           env_tag == other.env_tag;
  }
};

// Throws kData when shapes disagree or values are non-finite.
void ValidateTrajectory(const Trajectory& trajectory);

}  // namespace otr
