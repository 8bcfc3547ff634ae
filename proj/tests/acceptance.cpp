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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Pipeline runs go under ./acceptance_runs (or argv[1]).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "otrlab/error.hpp"
#include "otrlab/harness.hpp"

using namespace otr;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;
namespace h = otr::harness;

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string F(const char* fmt, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c, d);
  return buf;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1: Sinkhorn against the exact solver on random small cost matrices.
Outcome OtCorrectness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(1, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_rel = 0.0, worst_marg = 0.0;
  int bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = size(rng), n = size(rng);
    MatrixXd c(m, n);
    for (auto& x : c.reshaped()) x = u(rng);
    const ot::CostMatrix cost(c);
    const auto exact = ot::ExactOt(cost);
    const auto approx = ot::Sinkhorn(cost, {0.005, 100000, 1e-10});
    const double rel = std::abs(approx.transport_cost - exact.transport_cost) /
                       std::max(exact.transport_cost, 1e-12);
    worst_rel = std::max(worst_rel, rel);
    worst_marg = std::max(worst_marg, approx.marginal_violation);
    if (rel > 0.02 || approx.marginal_violation >= 1e-6) ++bad;
  }
  const double secs = Seconds(t0);
  return {bad == 0 && secs < 10.0,
          F("200 matrices, worst relative cost gap %.3g, worst marginal violation %.3g, "
            "%.0f failing, %.2fs",
            worst_rel, worst_marg, bad, secs)};
}

// 2: labeler rewards against hand-rolled row sums of the optimal plan.
Outcome RewardOracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> len(1, 6);
  std::normal_distribution<double> g(0.0, 1.0);
  labeler::OtConfig exact_cfg;
  exact_cfg.solver = ot::Solver::kExact;
  const labeler::OtConfig sink_cfg = h::Profile("desk").label.ot;
  double worst_abs = 0.0, worst_rel = 0.0, worst_vertex = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int m = len(rng), n = len(rng), dim = 3;
    Trajectory u, e;
    u.states = MatrixXd::NullaryExpr(m, dim, [&] { return g(rng); });
    e.states = MatrixXd::NullaryExpr(n, dim, [&] { return g(rng); });
    u.actions = MatrixXd::Zero(std::max(m - 1, 0), 1);
    e.actions = MatrixXd::Zero(std::max(n - 1, 0), 1);
    u.episode_id = "u";
    e.episode_id = "e";

    // Scalar-loop squared distances.
    MatrixXd c(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < dim; ++k) s += std::pow(u.states(i, k) - e.states(j, k), 2);
        c(i, j) = s;
      }
    const auto plan = ot::ExactOt(ot::CostMatrix(c));
    if (m * n <= 20) {
      const auto vertex = oracle::EnumerateVertices(c);
      worst_vertex = std::max(worst_vertex, std::abs(vertex.cost - plan.transport_cost));
    }
    const auto r = labeler::LabelAgainstExpert(u, e, exact_cfg);
    for (int i = 0; i < m; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j) row += c(i, j) * plan.plan.coupling(i, j);
      worst_abs = std::max(worst_abs, std::abs(r.raw(i) + row));
    }
    const auto s = labeler::LabelAgainstExpert(u, e, sink_cfg);
    worst_rel = std::max(worst_rel, std::abs(s.raw_return - r.raw_return) /
                                        std::max(std::abs(r.raw_return), 1e-12));
  }
  const double secs = Seconds(t0);
  return {worst_abs <= 1e-9 && worst_rel <= 0.02 && worst_vertex <= 1e-9 && secs < 5.0,
          F("50 pairs, worst |exact - row sum| %.3g, worst Sinkhorn relative return gap %.3g, "
            "vertex-enumeration gap %.3g, %.2fs",
            worst_abs, worst_rel, worst_vertex, secs)};
}

// 3: squashing constants and monotonicity.
Outcome Squashing() {
  const auto cfg = h::Profile("desk").label;
  const bool exact = cfg.alpha == 5.0 && cfg.beta == 1.0 &&
                     labeler::Squash(0.0, cfg.alpha, cfg.beta) == 5.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-30.0, 0.0);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const double a = u(rng), b = u(rng);
    if (a == b) continue;
    const double lo = std::min(a, b), hi = std::max(a, b);
    if (!(labeler::Squash(lo, cfg.alpha, cfg.beta) <= labeler::Squash(hi, cfg.alpha, cfg.beta)))
      ++violations;
  }
  return {exact && violations == 0,
          F("s(0) = %.17g with alpha %.17g beta %.17g; %.0f monotonicity violations in 1e4 pairs",
            labeler::Squash(0.0, cfg.alpha, cfg.beta), cfg.alpha, cfg.beta, violations)};
}

// 4: tracking reward values.
Outcome EnvReward() {
  env::EnvConfig cfg;
  env::EnvState s = env::Reset(cfg, 3).state;
  s.camera_pos = s.cube_pos;
  s.camera_yaw = env::LineOfSightYaw(cfg, s.cube_pos);
  const auto obs = env::Observe(cfg, s);
  const double centered = env::TrackingReward(obs.image_point, obs.misorientation,
                                              cfg.reward_c, cfg.reward_lambda);
  const double offset = env::TrackingReward(env::Vec2(0.3, 0.0), 2.0, 1.0, 0.1);
  bool bounded = true;
  double best_return = -1e9;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto t = env::RolloutEpisode(
        cfg, [&](const env::Observation& o) { return env::ScriptedExpert(cfg, o); }, seed, "x");
    bounded &= t.rewards->maxCoeff() <= 1.0;
    bounded &= t.rewards->sum() <= cfg.horizon;
    best_return = std::max(best_return, t.rewards->sum());
  }
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> p(0.0, 3.0), th(-M_PI, M_PI);
  for (int i = 0; i < 10000; ++i) bounded &= env::TrackingReward(env::Vec2(p(rng), p(rng)), th(rng), 1.0, 0.1) <= 1.0;
  return {centered == 1.0 && offset == 0.5 && bounded,
          F("centered %.17g, (0.3, 2.0) -> %.17g, best expert return %.3f of %.0f", centered,
            offset, best_return, cfg.horizon)};
}

bool NearKink(const nn::MlpParams& p, const MatrixXd& x) {
  nn::ForwardCache cache;
  nn::ForwardBatch(p, x, &cache);
  for (const auto& z : cache.pre_activations)
    if (z.cwiseAbs().minCoeff() < 1e-3) return true;
  return false;
}

// 5: analytic gradients against central finite differences.
Outcome Gradients() {
  const auto t0 = Clock::now();
  std::map<std::string, int> checked, failed;
  double worst_all = 0.0;
  auto record = [&](const std::string& name, const VectorXd& a, const VectorXd& n) {
    double worst = 0.0;
    const bool ok = oracle::GradientsAgree(a, n, 1e-4, &worst);
    worst_all = std::max(worst_all, worst);
    ++checked[name];
    if (!ok) ++failed[name];
  };
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(0.0, 1.0);
  auto scramble = [&](nn::MlpParams& p) {
    VectorXd flat = nn::Flatten(p);
    for (auto& x : flat) x += 0.5 * g(rng);
    nn::Unflatten(flat, p);
  };

  for (int trial = 0; checked["mlp"] < 100 && trial < 1000; ++trial) {
    auto p = nn::InitMlp(100 + trial, 5, 3, std::vector<int>{8, 8});
    scramble(p);
    const VectorXd x = VectorXd::NullaryExpr(5, [&] { return g(rng); });
    const VectorXd dir = VectorXd::NullaryExpr(3, [&] { return g(rng); });
    if (NearKink(p, x.transpose())) continue;
    const auto r = nn::Backward(p, x, dir);
    auto f = [&](const VectorXd& flat) {
      auto q = p;
      nn::Unflatten(flat, q);
      return nn::Forward(q, x).dot(dir);
    };
    auto fx = [&](const VectorXd& xi) { return nn::Forward(p, xi).dot(dir); };
    record("mlp", nn::Flatten(r.params), oracle::FiniteDifference(f, nn::Flatten(p)));
    record("mlp_input", r.input_grad.row(0).transpose(), oracle::FiniteDifference(fx, x));
  }

  constexpr int kS = 4, kA = 2, kB = 4;
  for (int trial = 0; trial < 1000; ++trial) {
    if (checked["value"] >= 100 && checked["critic"] >= 100 && checked["policy"] >= 100) break;
    iql::IqlConfig c;
    c.hidden = {8, 8};
    c.seed = 500 + trial;
    auto nets = iql::InitNets(c, VectorXd::LinSpaced(kS, -0.5, 0.5),
                              VectorXd::LinSpaced(kS, 0.5, 2.0), (VectorXd(kA) << 0.05, 0.1).finished());
    for (auto* p : {&nets.q1, &nets.q2, &nets.q1_target, &nets.q2_target, &nets.value, &nets.policy.net})
      scramble(*p);
    for (int k = 0; k < kA; ++k) nets.policy.log_std(k) = 0.8 * g(rng);
    data::TransitionBatch b;
    b.states = MatrixXd::NullaryExpr(kB, kS, [&] { return g(rng); });
    b.next_states = MatrixXd::NullaryExpr(kB, kS, [&] { return g(rng); });
    b.actions = MatrixXd::NullaryExpr(kB, kA, [&] { return 0.02 * g(rng); });
    b.rewards = VectorXd::NullaryExpr(kB, [&] { return g(rng); });
    b.dones = VectorXd::NullaryExpr(kB, [&] { return g(rng) > 0.0 ? 1.0 : 0.0; });
    const MatrixXd sn = (b.states.rowwise() - nets.policy.state_mean.transpose()).array().rowwise() /
                        nets.policy.state_scale.transpose().array();
    MatrixXd sa(kB, kS + kA);
    sa << sn, b.actions.array().rowwise() / nets.policy.action_scale.transpose().array();

    auto net_loss = [&](nn::MlpParams iql::IqlNets::*member, auto loss) {
      return [&, member, loss](const VectorXd& flat) {
        auto m = nets;
        nn::Unflatten(flat, m.*member);
        return loss(m);
      };
    };
    if (!NearKink(nets.value, sn) && checked["value"] < 100) {
      auto loss = [&](const iql::IqlNets& m) { return iql::ComputeValueLoss(m, b, 0.7).loss; };
      record("value", nn::Flatten(iql::ComputeValueLoss(nets, b, 0.7).value),
             oracle::FiniteDifference(net_loss(&iql::IqlNets::value, loss), nn::Flatten(nets.value)));
    }
    if (!NearKink(nets.q1, sa) && !NearKink(nets.q2, sa) && checked["critic"] < 100) {
      auto loss = [&](const iql::IqlNets& m) { return iql::ComputeCriticLoss(m, b, 0.99).loss; };
      const auto gr = iql::ComputeCriticLoss(nets, b, 0.99);
      record("critic", nn::Flatten(gr.q1),
             oracle::FiniteDifference(net_loss(&iql::IqlNets::q1, loss), nn::Flatten(nets.q1)));
      record("critic_q2", nn::Flatten(gr.q2),
             oracle::FiniteDifference(net_loss(&iql::IqlNets::q2, loss), nn::Flatten(nets.q2)));
    }
    if (!NearKink(nets.policy.net, sn) && checked["policy"] < 100) {
      const auto gr = iql::ComputePolicyLoss(nets, b, 1.0 / 3.0);
      auto f = [&](const VectorXd& flat) {
        auto m = nets;
        nn::Unflatten(flat, m.policy.net);
        return iql::ComputePolicyLoss(m, b, 1.0 / 3.0).loss;
      };
      auto fs = [&](const VectorXd& ls) {
        auto m = nets;
        m.policy.log_std = ls;
        return iql::ComputePolicyLoss(m, b, 1.0 / 3.0).loss;
      };
      record("policy", nn::Flatten(gr.policy), oracle::FiniteDifference(f, nn::Flatten(nets.policy.net)));
      record("policy_log_std", gr.log_std, oracle::FiniteDifference(fs, nets.policy.log_std));
    }
  }
  const double secs = Seconds(t0);
  bool ok = secs < 30.0;
  std::string detail;
  for (const auto& [name, n] : checked) {
    ok &= n >= 100 && failed[name] == 0;
    detail += name + " " + std::to_string(n - failed[name]) + "/" + std::to_string(n) + ", ";
  }
  return {ok, detail + F("worst relative error %.3g, %.2fs", worst_all, secs)};
}

h::ExperimentConfig DeskRun(const fs::path& dir, int experts) {
  auto c = h::Profile("desk");
  c.corpus.expert_episodes = experts;
  c.output_dir = dir.string();
  return c;
}

struct PipelineRun {
  h::RunSummary summary;
  double seconds = 0.0;
  bool ok = false;
  std::string error;
};

PipelineRun Run(h::ExperimentConfig c, const std::vector<std::string>& stages) {
  PipelineRun r;
  c.stages = stages;
  const auto t0 = Clock::now();
  try {
    r.summary = h::RunExperiment(c, &std::cerr);
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = Seconds(t0);
  return r;
}

double OtrSpearman(const fs::path& dir) {
  const auto labeled = data::ReadDataset((dir / "data" / "labeled").string());
  const auto truth = data::ReadGroundTruth((dir / "data" / "unlabeled").string());
  std::map<std::string, double> gt;
  for (std::size_t i = 0; i < truth.episode_ids.size(); ++i) gt[truth.episode_ids[i]] = truth.returns[i];
  std::vector<double> a, b;
  for (const auto& t : labeled.episodes) {
    a.push_back(gt.at(t.episode_id));
    b.push_back(t.rewards->sum());
  }
  return oracle::Spearman(a, b);
}

bool MetricsFullHorizon(const fs::path& dir, const h::ExperimentConfig& c) {
  for (auto s : c.seeds) {
    std::ifstream in(dir / ("seed_" + std::to_string(s)) / "metrics.csv");
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (cells.size() != 8 || std::stod(cells[6]) != c.env.horizon) return false;
      ++rows;
    }
    if (rows == 0) return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_runs");
  fs::remove_all(root);
  fs::create_directories(root);
  std::vector<std::pair<int, Outcome>> results;
  auto report = [&](int id, const Outcome& o) {
    std::printf("CRITERION %d %s: %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    results.emplace_back(id, o);
  };
  auto guarded = [&](int id, const std::function<Outcome()>& f) {
    try {
      report(id, f());
    } catch (const std::exception& e) {
      report(id, {false, std::string("error: ") + e.what()});
    }
  };

  guarded(1, OtCorrectness);
  guarded(2, RewardOracle);
  guarded(3, Squashing);
  guarded(4, EnvReward);
  guarded(5, Gradients);

  const fs::path main_dir = root / "desk_10_experts";
  const auto main_cfg = DeskRun(main_dir, 10);

  // 6: generation plus labeling of the desk corpus.
  double rho = 0.0;
  const PipelineRun labeling = Run(main_cfg, {"gen", "label"});
  guarded(6, [&] {
    if (!labeling.ok) return Outcome{false, "pipeline error: " + labeling.error};
    rho = OtrSpearman(main_dir);
    return Outcome{rho > 0.5 && labeling.seconds < 120.0,
                   F("Spearman(ground-truth return, OTR return) = %.4f over 100 episodes; "
                     "gen + label %.1fs",
                     rho, labeling.seconds)};
  });

  // 7: training, evaluation and report on the labeled corpus.
  const PipelineRun training = Run(main_cfg, {"gen", "label", "train", "eval", "report"});
  guarded(7, [&] {
    if (!training.ok) return Outcome{false, "pipeline error: " + training.error};
    const auto& s = training.summary;
    std::string seeds;
    for (const auto& e : s.final_evals) seeds += F("%.4f ", e.normalized);
    const bool full = s.all_full_horizon && MetricsFullHorizon(main_dir, main_cfg);
    const double total = labeling.seconds + training.seconds;
    return Outcome{s.final_evals.size() == 3 && s.mean_normalized >= 0.6 &&
                       s.mean_normalized - s.behavior_mean_normalized >= 0.1 && full &&
                       total < 1800.0,
                   F("mean normalized return %.4f +/- %.4f, behavior mean %.4f, margin %.4f; ",
                     s.mean_normalized, s.std_normalized, s.behavior_mean_normalized,
                     s.mean_normalized - s.behavior_mean_normalized) +
                       "per seed [" + seeds + "]; " +
                       (full ? "every evaluation episode ran the full horizon; "
                             : "some evaluation episodes ended early; ") +
                       F("pipeline %.1fs", total)};
  });

  // 8: the same pipeline with a single expert demonstration.
  const fs::path one_dir = root / "desk_1_expert";
  const PipelineRun one = Run(DeskRun(one_dir, 1), h::kAllStages);
  guarded(8, [&] {
    if (!training.ok || !one.ok) return Outcome{false, "pipeline error: " + training.error + one.error};
    const double drop = training.summary.mean_normalized - one.summary.mean_normalized;
    return Outcome{drop < 0.15 && one.summary.final_evals.size() == 3,
                   F("10 experts %.4f, 1 expert %.4f +/- %.4f, drop %.4f",
                     training.summary.mean_normalized, one.summary.mean_normalized,
                     one.summary.std_normalized, drop) +
                       F("; %.1fs", one.seconds)};
  });

  // 9: an independent rerun of 6 and 7 reproduces every artifact.
  const fs::path rerun_dir = root / "desk_10_experts_rerun";
  const PipelineRun rerun = Run(DeskRun(rerun_dir, 10), h::kAllStages);
  guarded(9, [&] {
    if (!rerun.ok) return Outcome{false, "pipeline error: " + rerun.error};
    const bool agg = Slurp(main_dir / "aggregate.csv") == Slurp(rerun_dir / "aggregate.csv");
    const bool lab = Slurp(main_dir / "data" / "labeled.traj") ==
                     Slurp(rerun_dir / "data" / "labeled.traj");
    const double rho2 = OtrSpearman(rerun_dir);
    const bool aggregate_nonempty = !Slurp(main_dir / "aggregate.csv").empty();
    return Outcome{agg && lab && rho2 == rho && aggregate_nonempty,
                   std::string("aggregate CSV ") + (agg ? "identical" : "differs") +
                       ", labeled dataset " + (lab ? "identical" : "differs") +
                       F(", Spearman %.6f vs %.6f; %.1fs", rho, rho2, rerun.seconds)};
  });

  int failed = 0;
  for (const auto& [id, o] : results) failed += o.pass ? 0 : 1;
  std::printf("ACCEPTANCE %s: %d of %zu criteria passed\n", failed ? "FAIL" : "PASS",
              static_cast<int>(results.size()) - failed, results.size());
  return failed ? 1 : 0;
}
