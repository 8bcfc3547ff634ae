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

// Planar stand-in for an endoscope-camera tracking task. A camera hovering
// over the plane is driven by camera-frame velocity commands while a target
// cube loops a square path at constant speed.
//
// Image model: the cube's offset from the camera center, rotated into the
// camera frame and divided by the half-frame extent, so the image spans
// [-1, 1]^2 and its center is the origin. Misorientation is the camera yaw
// minus the yaw of the line of sight from the arm pivot to the cube, wrapped
// to (-pi, pi].
//
// Per-step reward: C - (|p| + lambda * |misorientation|), unclamped.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "otrlab/trajectory.hpp"

namespace otr::env {

using Vec2 = Eigen::Vector2d;

struct EnvConfig {
  int horizon = 500;
  int lap_period = 400;
  double side_length = 0.5;
  double workspace_half_extent = 1.0;
  double half_frame = 0.5;
  double reward_c = 1.0;
  double reward_lambda = 0.1;
  double v_max = 0.05;          // plane units per step, per axis
  double yaw_rate_max = 0.1;    // radians per step
  double init_pos_noise = 0.02;
  double init_yaw_noise = 0.05;
  int num_distractors = 3;
  double distractor_clearance = 0.2;
  Vec2 pivot = Vec2(0.0, -1.5);
  double expert_kp = 0.5;
  double expert_ktheta = 0.5;
};

struct EnvState {
  Vec2 camera_pos = Vec2::Zero();
  double camera_yaw = 0.0;
  Vec2 cube_pos = Vec2::Zero();
  int cube_waypoint_index = 0;
  int step_index = 0;
  Vec2 path_origin = Vec2::Zero();  // first corner; the cube starts here
  std::vector<Vec2> distractor_positions;
};

struct Action {
  Vec2 velocity = Vec2::Zero();  // camera frame
  double yaw_rate = 0.0;

  static constexpr int kDim = 3;
  Eigen::VectorXd ToVector() const;
  static Action FromVector(const Eigen::VectorXd& v);
};

struct Observation {
  Vec2 image_point = Vec2::Zero();
  bool in_frame = true;
  double misorientation = 0.0;
  EnvState state;
};

struct StepResult {
  EnvState state;
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

// Layout: [camera x, camera y, cos yaw, sin yaw, cube x, cube y,
//          image x, image y, misorientation].
inline constexpr int kStateDim = 9;
Eigen::VectorXd StateVector(const Observation& obs);

double TrackingReward(const Vec2& image_point, double misorientation, double c, double lambda);
double WrapAngle(double radians);

Vec2 CubePositionAt(const EnvConfig& config, const Vec2& path_origin, int step, int* waypoint = nullptr);
double LineOfSightYaw(const EnvConfig& config, const Vec2& cube_pos);
Eigen::Vector3d ActionBounds(const EnvConfig& config);
Action ClampAction(const EnvConfig& config, const Action& action);

Observation Observe(const EnvConfig& config, const EnvState& state);

struct ResetResult {
  EnvState state;
  Observation observation;
};

ResetResult Reset(const EnvConfig& config, std::uint64_t seed);
StepResult Step(const EnvConfig& config, const EnvState& state, const Action& action);

using Policy = std::function<Action(const Observation&)>;

Action ScriptedExpert(const EnvConfig& config, const Observation& obs);

// Stateful convenience wrapper.
class ActiveTrackEnv {
 public:
  explicit ActiveTrackEnv(EnvConfig config) : config_(std::move(config)) {}

  Observation reset(std::uint64_t seed);
  StepResult step(const Action& action);

  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return config_; }
  bool done() const { return done_; }

 private:
  EnvConfig config_;
  EnvState state_;
  bool done_ = true;
};

inline constexpr const char* kEnvTag = "activetrack2d-v1";

// Full-horizon rollout; the trajectory carries ground-truth rewards.
Trajectory RolloutEpisode(const EnvConfig& config, const Policy& policy, std::uint64_t seed,
                          const std::string& episode_id);

}  // namespace otr::env
