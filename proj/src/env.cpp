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

#include "otrlab/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <random>

#include "otrlab/error.hpp"

namespace otr::env {

namespace {

Eigen::Rotation2Dd Rot(double yaw) { return Eigen::Rotation2Dd(yaw); }

double SegmentDistance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

Eigen::VectorXd Action::ToVector() const {
  return (Eigen::VectorXd(3) << velocity.x(), velocity.y(), yaw_rate).finished();
}

Action Action::FromVector(const Eigen::VectorXd& v) {
  Require(v.size() == kDim, ErrorKind::kDimension,
          "action vector must have 3 components, got " + std::to_string(v.size()));
  return Action{Vec2(v(0), v(1)), v(2)};
}

Eigen::VectorXd StateVector(const Observation& obs) {
  const EnvState& s = obs.state;
  Eigen::VectorXd v(kStateDim);
  v << s.camera_pos.x(), s.camera_pos.y(), std::cos(s.camera_yaw), std::sin(s.camera_yaw),
      s.cube_pos.x(), s.cube_pos.y(), obs.image_point.x(), obs.image_point.y(),
      obs.misorientation;
  return v;
}

double TrackingReward(const Vec2& image_point, double misorientation, double c, double lambda) {
  return c - (image_point.norm() + lambda * std::abs(misorientation));
}

double WrapAngle(double radians) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double w = std::fmod(radians + std::numbers::pi, kTwoPi);
  if (w <= 0.0) w += kTwoPi;
  return w - std::numbers::pi;
}

Vec2 CubePositionAt(const EnvConfig& config, const Vec2& path_origin, int step, int* waypoint) {
  static const Vec2 kCorners[4] = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)};
  const int phase = step % config.lap_period;
  // Work in quarter-lap units so corners land on exact step counts.
  const double arc = 4.0 * static_cast<double>(phase) / static_cast<double>(config.lap_period);
  const int segment = std::min(3, static_cast<int>(std::floor(arc)));
  const double along = arc - segment;
  if (waypoint) *waypoint = segment;
  const Vec2& from = kCorners[segment];
  const Vec2& to = kCorners[(segment + 1) % 4];
  return path_origin + config.side_length * (from + along * (to - from));
}

double LineOfSightYaw(const EnvConfig& config, const Vec2& cube_pos) {
  const Vec2 d = cube_pos - config.pivot;
  return std::atan2(-d.x(), d.y());
}

Eigen::Vector3d ActionBounds(const EnvConfig& config) {
  return Eigen::Vector3d(config.v_max, config.v_max, config.yaw_rate_max);
}

Action ClampAction(const EnvConfig& config, const Action& a) {
  Action out;
  out.velocity = a.velocity.cwiseMax(-config.v_max).cwiseMin(config.v_max);
  out.yaw_rate = std::clamp(a.yaw_rate, -config.yaw_rate_max, config.yaw_rate_max);
  return out;
}

Observation Observe(const EnvConfig& config, const EnvState& state) {
  Observation obs;
  obs.state = state;
  obs.image_point = Rot(-state.camera_yaw) * (state.cube_pos - state.camera_pos) / config.half_frame;
  obs.in_frame = obs.image_point.cwiseAbs().maxCoeff() <= 1.0;
  obs.misorientation = WrapAngle(state.camera_yaw - LineOfSightYaw(config, state.cube_pos));
  return obs;
}

ResetResult Reset(const EnvConfig& config, std::uint64_t seed) {
  Require(config.horizon >= 1 && config.lap_period >= 4, ErrorKind::kConfig,
          "horizon must be >= 1 and lap period >= 4");
  const double w = config.workspace_half_extent;
  Require(config.side_length > 0.0 && config.side_length < 2.0 * w, ErrorKind::kConfig,
          "square path must fit inside the workspace");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> corner(-w, w - config.side_length);
  std::uniform_real_distribution<double> anywhere(-w, w);
  std::normal_distribution<double> normal(0.0, 1.0);

  EnvState s;
  s.path_origin = Vec2(corner(rng), corner(rng));
  s.cube_pos = CubePositionAt(config, s.path_origin, 0, &s.cube_waypoint_index);
  s.camera_pos = s.cube_pos + config.init_pos_noise * Vec2(normal(rng), normal(rng));
  s.camera_pos = s.camera_pos.cwiseMax(-w).cwiseMin(w);
  s.camera_yaw = WrapAngle(LineOfSightYaw(config, s.cube_pos) + config.init_yaw_noise * normal(rng));
  s.step_index = 0;

  const Vec2 o = s.path_origin, side = Vec2(config.side_length, 0), up = Vec2(0, config.side_length);
  const Vec2 corners[4] = {o, o + side, o + side + up, o + up};
  for (int k = 0; k < config.num_distractors; ++k) {
    // Rejection sampling; the clearance band always leaves free area.
    for (int attempt = 0; attempt < 10000; ++attempt) {
      const Vec2 p(anywhere(rng), anywhere(rng));
      double d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < 4; ++c) d = std::min(d, SegmentDistance(p, corners[c], corners[(c + 1) % 4]));
      if (d >= config.distractor_clearance) {
        s.distractor_positions.push_back(p);
        break;
      }
    }
  }
  return {s, Observe(config, s)};
}

StepResult Step(const EnvConfig& config, const EnvState& state, const Action& action) {
  Require(state.step_index < config.horizon, ErrorKind::kState,
          "step called on a finished episode (step " + std::to_string(state.step_index) + ")");
  const Action a = ClampAction(config, action);
  const double w = config.workspace_half_extent;
  StepResult r;
  r.state = state;
  EnvState& s = r.state;
  s.camera_pos += Rot(state.camera_yaw) * a.velocity;
  s.camera_pos = s.camera_pos.cwiseMax(-w).cwiseMin(w);
  s.camera_yaw = WrapAngle(state.camera_yaw + a.yaw_rate);
  s.step_index = state.step_index + 1;
  s.cube_pos = CubePositionAt(config, s.path_origin, s.step_index, &s.cube_waypoint_index);
  r.observation = Observe(config, s);
  r.reward = TrackingReward(r.observation.image_point, r.observation.misorientation,
                            config.reward_c, config.reward_lambda);
  r.done = s.step_index == config.horizon;
  return r;
}

Action ScriptedExpert(const EnvConfig& config, const Observation& obs) {
  Action a;
  // Camera-frame offset of the cube, in plane units.
  a.velocity = config.expert_kp * config.half_frame * obs.image_point;
  a.yaw_rate = -config.expert_ktheta * obs.misorientation;
  return ClampAction(config, a);
}

Observation ActiveTrackEnv::reset(std::uint64_t seed) {
  auto r = Reset(config_, seed);
  state_ = std::move(r.state);
  done_ = false;
  return r.observation;
}

StepResult ActiveTrackEnv::step(const Action& action) {
  Require(!done_, ErrorKind::kState, "episode is done; call reset first");
  StepResult r = Step(config_, state_, action);
  state_ = r.state;
  done_ = r.done;
  return r;
}

Trajectory RolloutEpisode(const EnvConfig& config, const Policy& policy, std::uint64_t seed,
                          const std::string& episode_id) {
  Trajectory t;
  t.episode_id = episode_id;
  t.env_tag = kEnvTag;
  t.states.resize(config.horizon + 1, kStateDim);
  t.actions.resize(config.horizon, Action::kDim);
  Eigen::VectorXd rewards(config.horizon);
  auto [state, obs] = Reset(config, seed);
  t.states.row(0) = StateVector(obs).transpose();
  for (int k = 0; k < config.horizon; ++k) {
    const Action a = ClampAction(config, policy(obs));
    StepResult r = Step(config, state, a);
    t.actions.row(k) = a.ToVector().transpose();
    t.states.row(k + 1) = StateVector(r.observation).transpose();
    rewards(k) = r.reward;
    state = std::move(r.state);
    obs = std::move(r.observation);
  }
  t.rewards = rewards;
  return t;
}

}  // namespace otr::env
