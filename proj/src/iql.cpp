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

#include "otrlab/iql.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <numbers>

#include "otrlab/error.hpp"
#include "otrlab/ot.hpp"

namespace otr::iql {

namespace {

using nn::Matrix;
using nn::Vector;

Matrix NormStates(const GaussianPolicy& p, const Matrix& s) {
  Require(s.cols() == p.state_dim(), ErrorKind::kDimension,
          "state dimension " + std::to_string(s.cols()) + " does not match the networks (" +
              std::to_string(p.state_dim()) + ")");
  return (s.rowwise() - p.state_mean.transpose()).array().rowwise() /
         p.state_scale.transpose().array();
}

Matrix NormActions(const GaussianPolicy& p, const Matrix& a) {
  Require(a.cols() == p.action_dim(), ErrorKind::kDimension,
          "action dimension " + std::to_string(a.cols()) + " does not match the networks (" +
              std::to_string(p.action_dim()) + ")");
  return a.array().rowwise() / p.action_scale.transpose().array();
}

Matrix Concat(const Matrix& a, const Matrix& b) {
  Matrix x(a.rows(), a.cols() + b.cols());
  x << a, b;
  return x;
}

void CheckFinite(double loss, const char* what) {
  Require(std::isfinite(loss), ErrorKind::kNumerical, std::string(what) + " loss is not finite");
}

Vector ClampedLogStd(const GaussianPolicy& p) {
  return p.log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

// min of the target critics at (s, a), plus V(s), on normalized inputs.
Vector TargetQ(const IqlNets& n, const Matrix& sa) {
  return nn::ForwardBatch(n.q1_target, sa).col(0).cwiseMin(nn::ForwardBatch(n.q2_target, sa).col(0));
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void IqlConfig::Validate() const {
  Require(gamma > 0.0 && gamma < 1.0, ErrorKind::kConfig, "gamma must lie in (0, 1)");
  Require(tau > 0.0 && tau <= 1.0, ErrorKind::kConfig, "tau must lie in (0, 1]");
  Require(expectile > 0.5 && expectile < 1.0, ErrorKind::kConfig, "expectile must lie in (0.5, 1)");
  Require(awr_temperature > 0.0, ErrorKind::kConfig, "awr_temperature must be > 0");
  Require(batch_size >= 1, ErrorKind::kConfig, "batch_size must be >= 1");
  Require(learning_rate > 0.0, ErrorKind::kConfig, "learning_rate must be > 0");
  Require(gradient_steps >= 0, ErrorKind::kConfig, "gradient_steps must be >= 0");
  Require(eval_interval > 0, ErrorKind::kConfig, "eval_interval must be > 0");
  for (int h : hidden) Require(h >= 1, ErrorKind::kConfig, "hidden sizes must be >= 1");
  for (double a : action_scale) Require(a > 0.0, ErrorKind::kConfig, "action_scale entries must be > 0");
}

IqlNets InitNets(const IqlConfig& c, const Eigen::VectorXd& state_mean,
                 const Eigen::VectorXd& state_scale, const Eigen::VectorXd& action_scale) {
  const int sd = static_cast<int>(state_mean.size()), ad = static_cast<int>(action_scale.size());
  Require(sd >= 1 && ad >= 1 && state_scale.size() == sd, ErrorKind::kDimension,
          "bad normalization vector sizes");
  const nn::AdamConfig adam{c.learning_rate};
  IqlNets n;
  n.q1 = nn::InitMlp(data::DeriveSeed(c.seed, 10, 1), sd + ad, 1, c.hidden);
  n.q2 = nn::InitMlp(data::DeriveSeed(c.seed, 10, 2), sd + ad, 1, c.hidden);
  n.value = nn::InitMlp(data::DeriveSeed(c.seed, 10, 3), sd, 1, c.hidden);
  n.policy.net = nn::InitMlp(data::DeriveSeed(c.seed, 10, 4), sd, ad, c.hidden, 0.01);
  n.q1_target = n.q1;
  n.q2_target = n.q2;
  n.policy.log_std = Vector::Zero(ad);
  n.policy.state_mean = state_mean;
  n.policy.state_scale = state_scale;
  n.policy.action_scale = action_scale;
  n.q1_opt = nn::AdamState::For(n.q1, adam);
  n.q2_opt = nn::AdamState::For(n.q2, adam);
  n.value_opt = nn::AdamState::For(n.value, adam);
  n.policy_opt = nn::AdamState::For(n.policy.net, adam);
  n.log_std_m = Eigen::ArrayXd::Zero(ad);
  n.log_std_v = Eigen::ArrayXd::Zero(ad);
  return n;
}

ValueLoss ComputeValueLoss(const IqlNets& n, const data::TransitionBatch& b, double expectile) {
  const Matrix s = NormStates(n.policy, b.states);
  const Vector q = TargetQ(n, Concat(s, NormActions(n.policy, b.actions)));
  nn::ForwardCache cache;
  const Vector v = nn::ForwardBatch(n.value, s, &cache).col(0);
  const Vector u = q - v;
  const double N = static_cast<double>(b.size());
  ValueLoss out;
  Matrix dv(b.size(), 1);
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const double w = u(i) < 0.0 ? 1.0 - expectile : expectile;
    out.loss += w * u(i) * u(i) / N;
    dv(i, 0) = -2.0 * w * u(i) / N;
  }
  CheckFinite(out.loss, "value");
  out.value = nn::Backward(n.value, cache, dv).params;
  return out;
}

CriticLoss ComputeCriticLoss(const IqlNets& n, const data::TransitionBatch& b, double gamma) {
  const Matrix sa = Concat(NormStates(n.policy, b.states), NormActions(n.policy, b.actions));
  const Vector next_v = nn::ForwardBatch(n.value, NormStates(n.policy, b.next_states)).col(0);
  const Vector y = b.rewards.array() + gamma * (1.0 - b.dones.array()) * next_v.array();
  const double N = static_cast<double>(b.size());
  CriticLoss out;
  auto one = [&](const nn::MlpParams& q, nn::MlpGradients& g) {
    nn::ForwardCache cache;
    const Vector r = nn::ForwardBatch(q, sa, &cache).col(0) - y;
    out.loss += r.squaredNorm() / N;
    g = nn::Backward(q, cache, Matrix(2.0 * r / N)).params;
  };
  one(n.q1, out.q1);
  one(n.q2, out.q2);
  CheckFinite(out.loss, "critic");
  return out;
}

PolicyLoss ComputePolicyLoss(const IqlNets& n, const data::TransitionBatch& b,
                             double awr_temperature) {
  const Matrix s = NormStates(n.policy, b.states);
  const Matrix a = NormActions(n.policy, b.actions);
  const Vector adv = TargetQ(n, Concat(s, a)) - nn::ForwardBatch(n.value, s).col(0);
  const Vector w = (adv / awr_temperature).array().exp().min(kWeightClamp);

  nn::ForwardCache cache;
  const Matrix mu = nn::ForwardBatch(n.policy.net, s, &cache).array().tanh();
  const Vector ls = ClampedLogStd(n.policy);
  const Eigen::ArrayXd inv_var = (-2.0 * ls.array()).exp();
  const Matrix diff = a - mu;
  const double N = static_cast<double>(b.size());
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

  PolicyLoss out;
  Matrix dz(b.size(), a.cols());
  Eigen::ArrayXd dls = Eigen::ArrayXd::Zero(a.cols());
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    double logp = 0.0;
    for (Eigen::Index k = 0; k < a.cols(); ++k) {
      const double d = diff(i, k);
      logp += -0.5 * d * d * inv_var(k) - ls(k) - half_log_2pi;
      const double dmu = -w(i) * d * inv_var(k) / N;
      dz(i, k) = dmu * (1.0 - mu(i, k) * mu(i, k));
      dls(k) += -w(i) * (d * d * inv_var(k) - 1.0) / N;
    }
    out.loss -= w(i) * logp / N;
  }
  CheckFinite(out.loss, "policy");
  out.policy = nn::Backward(n.policy.net, cache, dz).params;
  out.log_std = Vector::Zero(a.cols());
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double raw = n.policy.log_std(k);
    if (raw > kLogStdMin && raw < kLogStdMax) out.log_std(k) = dls(k);
  }
  return out;
}

StepLosses UpdateStep(IqlNets& n, const data::TransitionBatch& b, const IqlConfig& c) {
  StepLosses l;
  const ValueLoss v = ComputeValueLoss(n, b, c.expectile);
  nn::AdamStep(n.value, v.value, n.value_opt);
  l.value = v.loss;

  const CriticLoss q = ComputeCriticLoss(n, b, c.gamma);
  nn::AdamStep(n.q1, q.q1, n.q1_opt);
  nn::AdamStep(n.q2, q.q2, n.q2_opt);
  l.critic = q.loss;

  const PolicyLoss p = ComputePolicyLoss(n, b, c.awr_temperature);
  Require(p.log_std.allFinite(), ErrorKind::kNumerical, "non-finite gradient in log_std");
  nn::AdamStep(n.policy.net, p.policy, n.policy_opt);
  ++n.log_std_steps;
  Eigen::ArrayXd ls = n.policy.log_std.array();
  nn::AdamUpdate(ls, p.log_std.array(), n.log_std_m, n.log_std_v, n.log_std_steps,
                 n.policy_opt.config);
  n.policy.log_std = ls.matrix();
  l.policy = p.loss;

  nn::SoftUpdate(n.q1_target, n.q1, c.tau);
  nn::SoftUpdate(n.q2_target, n.q2, c.tau);
  return l;
}

Eigen::VectorXd Act(const GaussianPolicy& p, const Eigen::VectorXd& state, bool deterministic,
                    std::mt19937_64* rng) {
  Require(state.size() == p.state_dim(), ErrorKind::kDimension,
          "state has " + std::to_string(state.size()) + " components, policy expects " +
              std::to_string(p.state_dim()));
  const Vector s = (state - p.state_mean).cwiseQuotient(p.state_scale);
  Eigen::ArrayXd a = nn::Forward(p.net, s).array().tanh();
  if (!deterministic) {
    Require(rng != nullptr, ErrorKind::kContract, "stochastic action needs an rng");
    std::normal_distribution<double> normal(0.0, 1.0);
    const Vector ls = ClampedLogStd(p);
    for (Eigen::Index k = 0; k < a.size(); ++k) a(k) += std::exp(ls(k)) * normal(*rng);
    a = a.max(-1.0).min(1.0);
  }
  return (a * p.action_scale.array()).matrix();
}

void SavePolicy(const std::string& path, const GaussianPolicy& p) {
  const Eigen::Index sd = p.state_dim(), ad = p.action_dim();
  Vector extra(2 * ad + 2 * sd);
  extra << p.log_std, p.action_scale, p.state_mean, p.state_scale;
  nn::SaveMlp(path, p.net, extra);
}

GaussianPolicy LoadPolicy(const std::string& path) {
  GaussianPolicy p;
  Vector extra;
  p.net = nn::LoadMlp(path, &extra);
  const Eigen::Index sd = p.net.in_dim(), ad = p.net.out_dim();
  Require(extra.size() == 2 * ad + 2 * sd, ErrorKind::kData,
          "policy checkpoint " + path + " lacks normalization data");
  p.log_std = extra.segment(0, ad);
  p.action_scale = extra.segment(ad, ad);
  p.state_mean = extra.segment(2 * ad, sd);
  p.state_scale = extra.segment(2 * ad + sd, sd);
  return p;
}

std::string MetricsCsvHeader() {
  return "step,value_loss,critic_loss,policy_loss,eval_return_mean,eval_return_std,"
         "eval_episode_steps,normalized_return";
}

std::string MetricsCsvRow(const MetricsRow& r) {
  return std::to_string(r.step) + "," + Num(r.losses.value) + "," + Num(r.losses.critic) + "," +
         Num(r.losses.policy) + "," + Num(r.eval.return_mean) + "," + Num(r.eval.return_std) + "," +
         Num(r.eval.steps_mean) + "," + Num(r.eval.normalized);
}

TrainResult Train(const IqlConfig& c, const data::Dataset& labeled, const Evaluator& evaluator,
                  const std::string& out_dir) {
  namespace fs = std::filesystem;
  c.Validate();
  data::TransitionBatch all = data::BuildTransitions(labeled);
  // Episodes that end on the time limit are truncated, not terminated.
  if (!c.episode_end_is_terminal) all.dones.setZero();
  Require(c.batch_size <= all.size(), ErrorKind::kConfig,
          "batch_size exceeds the " + std::to_string(all.size()) + " available transitions");

  const ot::Standardizer stats = ot::Standardizer::Fit(all.states);
  Vector action_scale(all.actions.cols());
  if (c.action_scale.empty()) {
    action_scale = all.actions.cwiseAbs().colwise().maxCoeff().transpose().cwiseMax(1e-6);
  } else {
    Require(static_cast<Eigen::Index>(c.action_scale.size()) == all.actions.cols(),
            ErrorKind::kConfig, "action_scale length does not match the action dimension");
    action_scale = Eigen::Map<const Vector>(c.action_scale.data(), all.actions.cols());
  }

  TrainResult result;
  result.nets = InitNets(c, stats.mean, stats.scale, action_scale);
  IqlNets& nets = result.nets;

  std::ofstream metrics;
  std::string last_good;
  const fs::path dir(out_dir);
  if (!out_dir.empty()) {
    fs::create_directories(dir / "checkpoints");
    nlohmann::json j = {{"gamma", c.gamma},
                        {"tau", c.tau},
                        {"batch_size", c.batch_size},
                        {"learning_rate", c.learning_rate},
                        {"expectile", c.expectile},
                        {"awr_temperature", c.awr_temperature},
                        {"gradient_steps", c.gradient_steps},
                        {"seed", c.seed},
                        {"hidden", c.hidden},
                        {"eval_interval", c.eval_interval},
                        {"episode_end_is_terminal", c.episode_end_is_terminal},
                        {"action_scale", std::vector<double>(action_scale.begin(), action_scale.end())}};
    std::ofstream(dir / "config.json") << j.dump(2) << "\n";
    metrics.open(dir / "metrics.csv", std::ios::trunc);
    Require(metrics.good(), ErrorKind::kIo, "cannot write " + (dir / "metrics.csv").string());
    metrics << MetricsCsvHeader() << "\n";
  }

  StepLosses sum;
  int since = 0;
  auto record = [&](int step) {
    MetricsRow row;
    row.step = step;
    if (since > 0) {
      row.losses = {sum.value / since, sum.critic / since, sum.policy / since};
    }
    sum = {};
    since = 0;
    if (evaluator) row.eval = evaluator(nets.policy, step);
    result.metrics.push_back(row);
    if (!out_dir.empty()) {
      char name[48];
      std::snprintf(name, sizeof name, "policy_%07d.bin", step);
      const std::string path = (dir / "checkpoints" / name).string();
      SavePolicy(path, nets.policy);
      last_good = path;
      metrics << MetricsCsvRow(row) << "\n";
      metrics.flush();
    }
  };

  record(0);
  std::mt19937_64 rng(data::DeriveSeed(c.seed, 20, 0));
  for (int step = 1; step <= c.gradient_steps; ++step) {
    try {
      const StepLosses l = UpdateStep(nets, data::SampleBatch(all, rng, c.batch_size), c);
      sum.value += l.value;
      sum.critic += l.critic;
      sum.policy += l.policy;
      ++since;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumerical) throw;
      Fail(ErrorKind::kNumerical, "training diverged at step " + std::to_string(step) + ": " +
                                      e.what() +
                                      (last_good.empty() ? "" : "; last good checkpoint " + last_good));
    }
    if (step % c.eval_interval == 0 || step == c.gradient_steps) record(step);
  }

  if (!out_dir.empty()) {
    const fs::path ck = dir / "checkpoints";
    nn::SaveMlp((ck / "q1.bin").string(), nets.q1);
    nn::SaveMlp((ck / "q2.bin").string(), nets.q2);
    nn::SaveMlp((ck / "q1_target.bin").string(), nets.q1_target);
    nn::SaveMlp((ck / "q2_target.bin").string(), nets.q2_target);
    nn::SaveMlp((ck / "value.bin").string(), nets.value);
    SavePolicy((ck / "policy.bin").string(), nets.policy);
  }
  return result;
}

}  // namespace otr::iql
