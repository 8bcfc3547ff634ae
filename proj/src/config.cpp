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

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "otrlab/error.hpp"
#include "otrlab/harness.hpp"

namespace otr::harness {

using nlohmann::json;

namespace {

json ToJson(const ExperimentConfig& c) {
  const auto& e = c.env;
  const auto& l = c.label;
  const auto& q = c.iql;
  return {
      {"profile", c.profile},
      {"env",
       {{"horizon", e.horizon},
        {"lap_period", e.lap_period},
        {"side_length", e.side_length},
        {"workspace_half_extent", e.workspace_half_extent},
        {"half_frame", e.half_frame},
        {"reward_c", e.reward_c},
        {"reward_lambda", e.reward_lambda},
        {"v_max", e.v_max},
        {"yaw_rate_max", e.yaw_rate_max},
        {"init_pos_noise", e.init_pos_noise},
        {"init_yaw_noise", e.init_yaw_noise},
        {"num_distractors", e.num_distractors},
        {"distractor_clearance", e.distractor_clearance},
        {"pivot", {e.pivot.x(), e.pivot.y()}},
        {"expert_kp", e.expert_kp},
        {"expert_ktheta", e.expert_ktheta}}},
      {"corpus",
       {{"expert_episodes", c.corpus.expert_episodes},
        {"unlabeled_episodes", c.corpus.unlabeled_episodes},
        {"seed", c.corpus.seed},
        {"noise_sigmas", c.corpus.noise_sigmas},
        {"random_fractions", c.corpus.random_fractions},
        {"segment_min", c.corpus.segment_min},
        {"segment_max", c.corpus.segment_max}}},
      {"label",
       {{"metric", std::string(ot::MetricName(l.ot.metric))},
        {"solver", l.ot.solver == ot::Solver::kExact ? "exact" : "sinkhorn"},
        {"epsilon", l.ot.sinkhorn.epsilon},
        {"max_iters", l.ot.sinkhorn.max_iters},
        {"tol", l.ot.sinkhorn.tol},
        {"alpha", l.alpha},
        {"beta", l.beta},
        {"standardize", l.standardize},
        {"max_failure_fraction", l.max_failure_fraction}}},
      {"iql",
       {{"gamma", q.gamma},
        {"tau", q.tau},
        {"batch_size", q.batch_size},
        {"learning_rate", q.learning_rate},
        {"expectile", q.expectile},
        {"awr_temperature", q.awr_temperature},
        {"gradient_steps", q.gradient_steps},
        {"hidden", q.hidden},
        {"eval_interval", q.eval_interval},
        {"episode_end_is_terminal", q.episode_end_is_terminal},
        {"action_scale", q.action_scale}}},
      {"experiment",
       {{"stages", c.stages},
        {"seeds", c.seeds},
        {"eval_episodes", c.eval_episodes},
        {"output_dir", c.output_dir}}}};
}

template <typename T>
void Get(const json& j, const char* key, T& out, const std::string& section) {
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& ex) {
    Fail(ErrorKind::kConfig, "config key " + section + "." + key + ": " + ex.what());
  }
}

ExperimentConfig FromJson(const json& j) {
  ExperimentConfig c;
  c.profile = j.at("profile").get<std::string>();
  const json& e = j.at("env");
  Get(e, "horizon", c.env.horizon, "env");
  Get(e, "lap_period", c.env.lap_period, "env");
  Get(e, "side_length", c.env.side_length, "env");
  Get(e, "workspace_half_extent", c.env.workspace_half_extent, "env");
  Get(e, "half_frame", c.env.half_frame, "env");
  Get(e, "reward_c", c.env.reward_c, "env");
  Get(e, "reward_lambda", c.env.reward_lambda, "env");
  Get(e, "v_max", c.env.v_max, "env");
  Get(e, "yaw_rate_max", c.env.yaw_rate_max, "env");
  Get(e, "init_pos_noise", c.env.init_pos_noise, "env");
  Get(e, "init_yaw_noise", c.env.init_yaw_noise, "env");
  Get(e, "num_distractors", c.env.num_distractors, "env");
  Get(e, "distractor_clearance", c.env.distractor_clearance, "env");
  std::vector<double> pivot;
  Get(e, "pivot", pivot, "env");
  Require(pivot.size() == 2, ErrorKind::kConfig, "config key env.pivot needs two numbers");
  c.env.pivot = env::Vec2(pivot[0], pivot[1]);
  Get(e, "expert_kp", c.env.expert_kp, "env");
  Get(e, "expert_ktheta", c.env.expert_ktheta, "env");

  const json& k = j.at("corpus");
  Get(k, "expert_episodes", c.corpus.expert_episodes, "corpus");
  Get(k, "unlabeled_episodes", c.corpus.unlabeled_episodes, "corpus");
  Get(k, "seed", c.corpus.seed, "corpus");
  Get(k, "noise_sigmas", c.corpus.noise_sigmas, "corpus");
  Get(k, "random_fractions", c.corpus.random_fractions, "corpus");
  Get(k, "segment_min", c.corpus.segment_min, "corpus");
  Get(k, "segment_max", c.corpus.segment_max, "corpus");

  const json& l = j.at("label");
  std::string metric, solver;
  Get(l, "metric", metric, "label");
  c.label.ot.metric = ot::ParseMetric(metric);
  Get(l, "solver", solver, "label");
  Require(solver == "sinkhorn" || solver == "exact", ErrorKind::kConfig,
          "config key label.solver must be sinkhorn or exact");
  c.label.ot.solver = solver == "exact" ? ot::Solver::kExact : ot::Solver::kSinkhorn;
  Get(l, "epsilon", c.label.ot.sinkhorn.epsilon, "label");
  Get(l, "max_iters", c.label.ot.sinkhorn.max_iters, "label");
  Get(l, "tol", c.label.ot.sinkhorn.tol, "label");
  Get(l, "alpha", c.label.alpha, "label");
  Get(l, "beta", c.label.beta, "label");
  Get(l, "standardize", c.label.standardize, "label");
  Get(l, "max_failure_fraction", c.label.max_failure_fraction, "label");

  const json& q = j.at("iql");
  Get(q, "gamma", c.iql.gamma, "iql");
  Get(q, "tau", c.iql.tau, "iql");
  Get(q, "batch_size", c.iql.batch_size, "iql");
  Get(q, "learning_rate", c.iql.learning_rate, "iql");
  Get(q, "expectile", c.iql.expectile, "iql");
  Get(q, "awr_temperature", c.iql.awr_temperature, "iql");
  Get(q, "gradient_steps", c.iql.gradient_steps, "iql");
  Get(q, "hidden", c.iql.hidden, "iql");
  Get(q, "eval_interval", c.iql.eval_interval, "iql");
  Get(q, "episode_end_is_terminal", c.iql.episode_end_is_terminal, "iql");
  Get(q, "action_scale", c.iql.action_scale, "iql");

  const json& x = j.at("experiment");
  Get(x, "stages", c.stages, "experiment");
  Get(x, "seeds", c.seeds, "experiment");
  Get(x, "eval_episodes", c.eval_episodes, "experiment");
  Get(x, "output_dir", c.output_dir, "experiment");
  c.Validate();
  return c;
}

void CheckKeys(const json& user, const json& base, const std::string& where) {
  Require(user.is_object(), ErrorKind::kConfig,
          (where.empty() ? std::string("config") : where) + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    Require(base.contains(key), ErrorKind::kConfig, "unknown config key " + path);
    if (base.at(key).is_object()) CheckKeys(value, base.at(key), path);
  }
}

}  // namespace

void ExperimentConfig::Validate() const {
  auto bad = [](const std::string& what) { Fail(ErrorKind::kConfig, what); };
  if (profile != "desk" && profile != "full") bad("profile must be desk or full");
  if (env.horizon < 1) bad("env.horizon must be >= 1");
  if (env.lap_period < 4) bad("env.lap_period must be >= 4");
  if (env.side_length <= 0.0 || env.side_length >= 2.0 * env.workspace_half_extent)
    bad("env.side_length must be positive and fit the workspace");
  if (env.half_frame <= 0.0) bad("env.half_frame must be > 0");
  if (env.v_max <= 0.0 || env.yaw_rate_max <= 0.0) bad("action bounds must be > 0");
  if (env.num_distractors < 0) bad("env.num_distractors must be >= 0");
  if (corpus.expert_episodes < 1 || corpus.unlabeled_episodes < 1)
    bad("corpus episode counts must be >= 1");
  if (corpus.noise_sigmas.empty() || corpus.random_fractions.empty())
    bad("corpus noise schedule must not be empty");
  for (double f : corpus.random_fractions)
    if (f < 0.0 || f >= 1.0) bad("corpus.random_fractions entries must lie in [0, 1)");
  if (corpus.segment_min < 1 || corpus.segment_max < corpus.segment_min)
    bad("corpus segment lengths must satisfy 1 <= segment_min <= segment_max");
  if (label.ot.sinkhorn.epsilon <= 0.0) bad("label.epsilon must be > 0");
  if (label.ot.sinkhorn.max_iters < 1) bad("label.max_iters must be >= 1");
  if (label.alpha <= 0.0 || label.beta <= 0.0) bad("label.alpha and label.beta must be > 0");
  if (label.max_failure_fraction < 0.0 || label.max_failure_fraction > 1.0)
    bad("label.max_failure_fraction must lie in [0, 1]");
  iql.Validate();
  if (!iql.action_scale.empty() && iql.action_scale.size() != env::Action::kDim)
    bad("iql.action_scale must be empty or have one entry per action component");
  std::set<std::string> seen;
  for (const auto& s : stages) {
    if (std::find(kAllStages.begin(), kAllStages.end(), s) == kAllStages.end())
      bad("unknown stage '" + s + "'");
    if (!seen.insert(s).second) bad("stage '" + s + "' listed twice");
  }
  if (seeds.empty()) bad("experiment.seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
    bad("experiment.seeds must be distinct");
  if (eval_episodes < 1) bad("experiment.eval_episodes must be >= 1");
  if (output_dir.empty()) bad("experiment.output_dir must not be empty");
}

ExperimentConfig Profile(const std::string& name) {
  ExperimentConfig c;
  c.profile = name;
  c.label.ot.sinkhorn.max_iters = 100000;
  if (name == "desk") {
    c.env.horizon = 200;
    c.iql.gradient_steps = 50000;
    c.iql.eval_interval = 2000;
    c.iql.hidden = {64, 64};
    c.iql.awr_temperature = 1.0 / 3.0;
    c.seeds = {0, 1, 2};
    c.output_dir = "runs/desk";
  } else if (name == "full") {
    c.env.horizon = 500;
    c.iql.gradient_steps = 1000000;
    c.iql.eval_interval = 10000;
    c.iql.hidden = {256, 256};
    c.iql.awr_temperature = 1.0 / 3.0;
    c.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    c.output_dir = "runs/full";
  } else {
    Fail(ErrorKind::kConfig, "unknown profile '" + name + "' (desk or full)");
  }
  return c;
}

ExperimentConfig ParseConfig(const std::string& text) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::exception& ex) {
    Fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + ex.what());
  }
  Require(user.is_object(), ErrorKind::kConfig, "config must be a JSON object");
  const std::string profile = user.value("profile", std::string("desk"));
  json base = ToJson(Profile(profile));
  CheckKeys(user, base, "");
  base.merge_patch(user);
  return FromJson(base);
}

ExperimentConfig LoadConfig(const std::string& path) {
  std::ifstream in(path);
  Require(in.good(), ErrorKind::kIo, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str());
}

std::string ConfigToJson(const ExperimentConfig& c) { return ToJson(c).dump(2); }

void ApplyOverride(ExperimentConfig& c, const std::string& key, const std::string& value) {
  json v;
  try {
    v = json::parse(value);
  } catch (const json::exception&) {
    v = value;
  }
  if (key == "profile") {
    Require(v.is_string(), ErrorKind::kConfig, "profile must be a string");
    c = Profile(v.get<std::string>());
    return;
  }
  json j = ToJson(c);
  std::string pointer = "/" + key;
  for (char& ch : pointer)
    if (ch == '.') ch = '/';
  const json::json_pointer ptr(pointer);
  Require(key.find('.') != std::string::npos && j.contains(ptr) && !j.at(ptr).is_object(),
          ErrorKind::kConfig, "unknown config key " + key);
  j[ptr] = v;
  c = FromJson(j);
}

int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kData:
    case ErrorKind::kIo:
    case ErrorKind::kContract:
    case ErrorKind::kDimension:
    case ErrorKind::kSize: return 3;
    case ErrorKind::kNumerical:
    case ErrorKind::kLabeling: return 4;
    case ErrorKind::kState: return 5;
  }
  return 1;
}

}  // namespace otr::harness
