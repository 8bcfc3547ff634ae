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

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "otrlab/env.hpp"
#include "otrlab/error.hpp"

using namespace otr;
using namespace otr::env;

namespace {

EnvConfig Quiet() {
  EnvConfig c;
  c.init_pos_noise = 0.0;
  c.init_yaw_noise = 0.0;
  return c;
}

EnvState CenteredState(const EnvConfig& c, Vec2 cube) {
  EnvState s;
  s.cube_pos = cube;
  s.camera_pos = cube;
  s.camera_yaw = LineOfSightYaw(c, cube);
  return s;
}

}  // namespace

TEST_CASE("tracking reward values") {
  CHECK(TrackingReward(Vec2(0, 0), 0.0, 1.0, 0.1) == 1.0);
  CHECK(TrackingReward(Vec2(0.3, 0.0), 2.0, 1.0, 0.1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(TrackingReward(Vec2(0.0, -0.3), -2.0, 1.0, 0.1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(TrackingReward(Vec2(0.9, 1.2), 0.0, 1.0, 0.1) == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("centered aligned observation scores exactly one") {
  const EnvConfig c = Quiet();
  const Observation o = Observe(c, CenteredState(c, Vec2(0.2, -0.4)));
  CHECK(o.image_point.norm() == 0.0);
  CHECK(o.misorientation == 0.0);
  CHECK(o.in_frame);
  CHECK(TrackingReward(o.image_point, o.misorientation, c.reward_c, c.reward_lambda) == 1.0);
}

TEST_CASE("reward never exceeds one and returns stay under the horizon") {
  const EnvConfig c = Quiet();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    ActiveTrackEnv e(c);
    e.reset(i);
    double ret = 0.0;
    while (!e.done()) {
      const StepResult r = e.step(Action{Vec2(u(rng), u(rng)), u(rng)});
      CHECK(r.reward <= 1.0);
      ret += r.reward;
    }
    CHECK(ret <= c.horizon);
  }
}

TEST_CASE("image projection and frame test") {
  const EnvConfig c = Quiet();
  EnvState s = CenteredState(c, Vec2(0, 0));
  s.camera_yaw = std::numbers::pi / 2;  // camera x axis points along world +y
  s.cube_pos = Vec2(0, 0.25);
  const Observation o = Observe(c, s);
  CHECK(o.image_point.x() == doctest::Approx(0.5));
  CHECK(o.image_point.y() == doctest::Approx(0.0).epsilon(1e-12));
  s.cube_pos = Vec2(0, 0.6);
  CHECK_FALSE(Observe(c, s).in_frame);
  s.cube_pos = Vec2(0, 0.5);
  CHECK(Observe(c, s).in_frame);
}

TEST_CASE("wrap angle range") {
  CHECK(WrapAngle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(WrapAngle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(WrapAngle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
  CHECK(WrapAngle(0.25) == 0.25);
}

TEST_CASE("reset is deterministic and respects bounds") {
  const EnvConfig c;
  const auto a = Reset(c, 42), b = Reset(c, 42);
  CHECK(a.state.camera_pos == b.state.camera_pos);
  CHECK(a.state.camera_yaw == b.state.camera_yaw);
  CHECK(a.state.path_origin == b.state.path_origin);
  CHECK(a.state.distractor_positions == b.state.distractor_positions);
  CHECK(StateVector(a.observation) == StateVector(b.observation));
  for (int seed = 0; seed < 1000; ++seed) {
    const auto r = Reset(c, seed);
    const Vec2 lo = r.state.path_origin, hi = lo + Vec2::Constant(c.side_length);
    REQUIRE(lo.minCoeff() >= -1.0);
    REQUIRE(hi.maxCoeff() <= 1.0);
    REQUIRE(r.state.distractor_positions.size() == 3);
    for (const Vec2& d : r.state.distractor_positions) {
      // Distance to the square boundary.
      const Vec2 q = d - lo;
      const double s = c.side_length;
      const double dx = std::max({-q.x(), 0.0, q.x() - s}), dy = std::max({-q.y(), 0.0, q.y() - s});
      double dist = std::hypot(dx, dy);
      if (dx == 0.0 && dy == 0.0) dist = std::min({q.x(), s - q.x(), q.y(), s - q.y()});
      REQUIRE(dist >= 0.2 - 1e-12);
      REQUIRE(d.cwiseAbs().maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("no-op first step from a perfect start only loses drift") {
  const EnvConfig c = Quiet();
  ActiveTrackEnv e(c);
  const Observation o0 = e.reset(5);
  CHECK(o0.image_point.norm() == 0.0);
  CHECK(o0.misorientation == 0.0);
  const StepResult r = e.step(Action{});
  // Cube moved one step along +x; the line of sight turns slightly.
  const double speed = 4.0 * c.side_length / c.lap_period;
  const double p = speed / c.half_frame;
  const Vec2 start = e.state().path_origin;
  const double yaw_drift =
      std::abs(LineOfSightYaw(c, start + Vec2(speed, 0)) - LineOfSightYaw(c, start));
  CHECK(r.reward == doctest::Approx(1.0 - (p + c.reward_lambda * yaw_drift)).epsilon(1e-12));
  CHECK(r.reward > 0.98);
}

TEST_CASE("cube path closes after one lap") {
  const EnvConfig c;
  const Vec2 origin(-0.3, 0.1);
  int w = -1;
  for (int k = 0; k <= c.lap_period; ++k) {
    const Vec2 p = CubePositionAt(c, origin, k, &w);
    CHECK(w >= 0);
    CHECK(w <= 3);
    if (k > 0) {
      const Vec2 prev = CubePositionAt(c, origin, k - 1);
      CHECK((p - prev).norm() == doctest::Approx(4.0 * c.side_length / c.lap_period));
    }
  }
  CHECK((CubePositionAt(c, origin, c.lap_period) - origin).norm() < 1e-9);
  CHECK((CubePositionAt(c, origin, 100) - (origin + Vec2(0.5, 0))).norm() < 1e-12);
}

TEST_CASE("stepping a finished episode is a state error") {
  EnvConfig c = Quiet();
  c.horizon = 3;
  ActiveTrackEnv e(c);
  e.reset(1);
  CHECK_FALSE(e.step(Action{}).done);
  CHECK_FALSE(e.step(Action{}).done);
  CHECK(e.step(Action{}).done);
  CHECK(e.state().step_index == 3);
  try {
    e.step(Action{});
    FAIL("expected error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::kState);
  }
  try {
    Step(c, e.state(), Action{});
    FAIL("expected error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::kState);
  }
}

TEST_CASE("actions are clamped before integration") {
  const EnvConfig c = Quiet();
  EnvState s = CenteredState(c, Vec2(0, 0));
  s.camera_yaw = 0.0;
  const StepResult r = Step(c, s, Action{Vec2(10.0, -10.0), 5.0});
  CHECK(r.state.camera_pos.x() == doctest::Approx(c.v_max));
  CHECK(r.state.camera_pos.y() == doctest::Approx(-c.v_max));
  CHECK(r.state.camera_yaw == doctest::Approx(c.yaw_rate_max));
}

TEST_CASE("same seed and actions reproduce a trajectory") {
  const EnvConfig c;
  std::mt19937_64 r1(9), r2(9);
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  auto policy = [&](std::mt19937_64& rng) {
    return [&rng, &u](const Observation&) { return Action{Vec2(u(rng), u(rng)), u(rng)}; };
  };
  const Trajectory a = RolloutEpisode(c, policy(r1), 17, "a");
  const Trajectory b = RolloutEpisode(c, policy(r2), 17, "a");
  CHECK(a == b);
}

TEST_CASE("state vector layout") {
  const EnvConfig c;
  const auto r = Reset(c, 3);
  const Eigen::VectorXd v = StateVector(r.observation);
  REQUIRE(v.size() == kStateDim);
  CHECK(v(2) == doctest::Approx(std::cos(r.state.camera_yaw)));
  CHECK(v(3) == doctest::Approx(std::sin(r.state.camera_yaw)));

  // Moving the cube changes cube position, image point and misorientation only.
  EnvState moved = r.state;
  moved.cube_pos += Vec2(0.05, -0.02);
  const Eigen::VectorXd w = StateVector(Observe(c, moved));
  const Eigen::VectorXd diff = (w - v).cwiseAbs();
  for (int i : {0, 1, 2, 3}) CHECK(diff(i) == 0.0);
  for (int i : {4, 5, 6, 7, 8}) CHECK(diff(i) > 0.0);
}

TEST_CASE("scripted expert signs and zero error") {
  const EnvConfig c = Quiet();
  EnvState s = CenteredState(c, Vec2(0.1, 0.1));
  const Action zero = ScriptedExpert(c, Observe(c, s));
  CHECK(zero.velocity.cwiseAbs().maxCoeff() < 1e-3);
  CHECK(std::abs(zero.yaw_rate) < 1e-3);
  s.cube_pos += Eigen::Rotation2Dd(s.camera_yaw) * Vec2(0.1, 0.0);
  CHECK(ScriptedExpert(c, Observe(c, s)).velocity.x() > 0.0);
  s = CenteredState(c, Vec2(0.1, 0.1));
  s.camera_yaw += 0.3;
  CHECK(ScriptedExpert(c, Observe(c, s)).yaw_rate < 0.0);
}

TEST_CASE("scripted expert quality gate") {
  const EnvConfig c;  // full horizon, default reset perturbation
  double total = 0.0;
  for (int ep = 0; ep < 100; ++ep) {
    const Trajectory t = RolloutEpisode(
        c, [&](const Observation& o) { return ScriptedExpert(c, o); }, 1000 + ep, "e");
    REQUIRE(t.length() == c.horizon + 1);
    total += t.rewards->sum();
  }
  const double mean_return = total / 100.0;
  MESSAGE("expert mean return " << mean_return);
  CHECK(mean_return >= 450.0);
  CHECK(mean_return / c.horizon >= 0.9);
}
