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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "otrlab/error.hpp"
#include "otrlab/harness.hpp"

namespace otr::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  Require(in.good(), ErrorKind::kIo, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorKind::kIo, "cannot write " + p.string());
  out << text;
  Require(out.good(), ErrorKind::kIo, "write failed for " + p.string());
}

std::string Hash(const std::string& text) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(data::Fnv1a64(text.data(), text.size())));
  return buf;
}

// Resume bookkeeping: a stage is skipped when its stamp records the same
// input key and every output still has the recorded checksum.
class Stamps {
 public:
  explicit Stamps(fs::path dir) : dir_(std::move(dir)) {}

  bool Fresh(const std::string& name, const std::string& key) const {
    const fs::path p = dir_ / (name + ".json");
    if (!fs::exists(p)) return false;
    json j;
    try {
      j = json::parse(Slurp(p));
    } catch (const json::exception&) {
      return false;
    }
    if (j.value("key", "") != key) return false;
    for (const auto& [file, sum] : j.at("outputs").items()) {
      if (!fs::exists(file) || data::FileChecksum(file) != sum.get<std::string>()) return false;
    }
    return true;
  }

  void Write(const std::string& name, const std::string& key,
             const std::vector<fs::path>& outputs) const {
    json o = json::object();
    for (const fs::path& f : outputs) o[f.string()] = data::FileChecksum(f.string());
    WriteFile(dir_ / (name + ".json"), json{{"key", key}, {"outputs", o}}.dump(2) + "\n");
  }

  void Clear(const std::string& name) const { fs::remove(dir_ / (name + ".json")); }

 private:
  fs::path dir_;
};

void RequireInput(const fs::path& p, const std::string& stage, const std::string& producer) {
  Require(fs::exists(p), ErrorKind::kData,
          "stage '" + stage + "' needs " + p.string() + "; run stage '" + producer + "' first");
}

json Section(const ExperimentConfig& c, const char* name) {
  return json::parse(ConfigToJson(c)).at(name);
}

EvalRecord ParseEvalRecord(const std::string& text) {
  const json j = json::parse(text);
  EvalRecord r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.step = j.at("step").get<int>();
  r.return_mean = j.at("return_mean").get<double>();
  r.return_std = j.at("return_std").get<double>();
  r.steps_mean = j.at("episode_steps_mean").get<double>();
  r.normalized = j.at("normalized_return").get<double>();
  r.returns = j.at("returns").get<std::vector<double>>();
  r.steps = j.at("episode_steps").get<std::vector<int>>();
  return r;
}

bool Wants(const ExperimentConfig& c, const std::string& stage) {
  return std::find(c.stages.begin(), c.stages.end(), stage) != c.stages.end();
}

}  // namespace

labeler::LabeledOutput LabelFiles(const std::string& expert_path,
                                  const std::string& unlabeled_path, const std::string& out_base,
                                  const labeler::LabelConfig& config,
                                  const std::string& report_path) {
  const data::Dataset experts = data::ReadDataset(expert_path);
  // Labels come from the alignment alone; any rewards on disk are dropped.
  const data::Dataset unlabeled = data::StripRewards(data::ReadDataset(unlabeled_path));
  Require(experts.manifest.env_tag == unlabeled.manifest.env_tag, ErrorKind::kData,
          "expert and unlabeled datasets come from different environments");
  Require(experts.manifest.state_dim == unlabeled.manifest.state_dim, ErrorKind::kDimension,
          "expert and unlabeled state dimensions differ");
  labeler::LabeledOutput out = labeler::LabelDataset(experts.episodes, unlabeled.episodes, config);

  data::Dataset labeled;
  labeled.manifest = unlabeled.manifest;
  labeled.manifest.reward_status = data::RewardStatus::kLabeled;
  labeled.manifest.generator["labeling"] = {
      {"metric", std::string(ot::MetricName(config.ot.metric))},
      {"solver", config.ot.solver == ot::Solver::kExact ? "exact" : "sinkhorn"},
      {"epsilon", config.ot.sinkhorn.epsilon},
      {"alpha", config.alpha},
      {"beta", config.beta},
      {"expert_episodes", experts.manifest.episode_count},
      {"expert_checksum", experts.manifest.traj_checksum}};
  labeled.episodes = out.trajectories;
  data::SyncManifest(labeled);
  data::WriteDataset(out_base, labeled);
  if (!report_path.empty()) WriteFile(report_path, labeler::ReportJson(out.report) + "\n");
  return out;
}

iql::TrainResult TrainSeed(const ExperimentConfig& config, std::uint64_t seed,
                           const std::string& labeled_path, const std::string& out_dir,
                           std::ostream* log) {
  const data::Dataset labeled = data::ReadDataset(labeled_path);
  Require(labeled.manifest.env_tag == env::kEnvTag, ErrorKind::kData,
          labeled_path + " was not generated by " + env::kEnvTag);
  iql::IqlConfig ic = config.iql;
  ic.seed = seed;
  if (ic.action_scale.empty()) {
    const Eigen::Vector3d b = env::ActionBounds(config.env);
    ic.action_scale = {b(0), b(1), b(2)};
  }
  const env::EnvConfig ec = config.env;
  const int episodes = config.eval_episodes;
  const auto t0 = std::chrono::steady_clock::now();
  iql::Evaluator evaluator = [&](const iql::GaussianPolicy& policy, int step) {
    const PolicyFn fn = [&policy](const env::Observation& o) {
      return env::Action::FromVector(iql::Act(policy, env::StateVector(o), true));
    };
    const EvalRecord r = EvaluatePolicy(ec, fn, episodes, seed);
    if (log) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      char buf[160];
      std::snprintf(buf, sizeof buf, "[train seed %llu] step %d normalized %.4f (%.0fs)\n",
                    static_cast<unsigned long long>(seed), step, r.normalized, secs);
      *log << buf << std::flush;
    }
    return iql::EvalResult{r.return_mean, r.return_std, r.steps_mean, r.normalized};
  };
  return iql::Train(ic, labeled, evaluator, out_dir);
}

RunSummary RunExperiment(const ExperimentConfig& config, std::ostream* log) {
  config.Validate();
  const fs::path root(config.output_dir);
  const fs::path data_dir = root / "data";
  const std::string expert = (data_dir / "expert").string();
  const std::string unlabeled = (data_dir / "unlabeled").string();
  const std::string labeled = (data_dir / "labeled").string();
  const fs::path label_report = data_dir / "label_report.json";
  const Stamps stamps(root / ".stamps");
  fs::create_directories(root);
  WriteFile(root / "config.json", ConfigToJson(config) + "\n");

  RunSummary summary;
  auto say = [&](const std::string& s) {
    if (log) *log << s << "\n" << std::flush;
  };
  auto run_stage = [&](const std::string& stage, const std::string& name, const std::string& key,
                       const std::function<std::vector<fs::path>()>& body) {
    if (stamps.Fresh(name, key)) {
      summary.stages_skipped.push_back(name);
      say("[" + name + "] up to date, skipped");
      return;
    }
    stamps.Clear(name);
    say("[" + name + "] running");
    std::vector<fs::path> outputs;
    try {
      outputs = body();
    } catch (const Error& e) {
      Fail(e.kind(), "stage '" + stage + "' failed: " + e.what());
    } catch (const std::exception& e) {
      Fail(ErrorKind::kIo, "stage '" + stage + "' failed: " + e.what());
    }
    stamps.Write(name, key, outputs);
    summary.stages_run.push_back(name);
  };
  auto seed_dir = [&](std::uint64_t s) { return root / ("seed_" + std::to_string(s)); };
  auto checksum = [](const std::string& base) {
    return data::FileChecksum(base + ".traj") + data::FileChecksum(base + ".manifest");
  };

  if (Wants(config, "gen")) {
    const std::string key =
        Hash(Section(config, "env").dump() + Section(config, "corpus").dump());
    run_stage("gen", "gen", key, [&] {
      fs::create_directories(data_dir);
      const auto s = data::GenerateCorpus(config.env, config.corpus, expert, unlabeled);
      char buf[128];
      std::snprintf(buf, sizeof buf, "[gen] expert mean %.4f, behavior mean %.4f",
                    s.expert_mean_normalized, s.behavior_mean_normalized);
      say(buf);
      return std::vector<fs::path>{expert + ".traj", expert + ".manifest",
                                   unlabeled + ".traj", unlabeled + ".manifest",
                                   data::SidecarPath(unlabeled)};
    });
  }

  if (Wants(config, "label")) {
    RequireInput(expert + ".traj", "label", "gen");
    RequireInput(unlabeled + ".traj", "label", "gen");
    const std::string key =
        Hash(Section(config, "label").dump() + checksum(expert) + checksum(unlabeled));
    run_stage("label", "label", key, [&] {
      LabelFiles(expert, unlabeled, labeled, config.label, label_report.string());
      return std::vector<fs::path>{labeled + ".traj", labeled + ".manifest", label_report};
    });
  }

  auto train_key = [&](std::uint64_t s) {
    return Hash(Section(config, "iql").dump() + Section(config, "env").dump() +
                std::to_string(config.eval_episodes) + "/" + std::to_string(s) + "/" +
                checksum(labeled));
  };
  if (Wants(config, "train")) {
    RequireInput(labeled + ".traj", "train", "label");
    for (std::uint64_t s : config.seeds) {
      const fs::path dir = seed_dir(s);
      run_stage("train", "train_seed_" + std::to_string(s), train_key(s), [&] {
        fs::remove_all(dir / "checkpoints");
        TrainSeed(config, s, labeled, dir.string(), log);
        return std::vector<fs::path>{dir / "metrics.csv", dir / "config.json",
                                     dir / "checkpoints" / "policy.bin"};
      });
    }
  }

  if (Wants(config, "eval")) {
    for (std::uint64_t s : config.seeds) {
      const fs::path dir = seed_dir(s);
      const fs::path policy = dir / "checkpoints" / "policy.bin";
      RequireInput(policy, "eval", "train");
      const std::string key = Hash(Section(config, "env").dump() +
                                   std::to_string(config.eval_episodes) + "/" +
                                   std::to_string(s) + "/" + data::FileChecksum(policy.string()));
      run_stage("eval", "eval_seed_" + std::to_string(s), key, [&] {
        EvalRecord r = EvaluateCheckpoint(policy.string(), config.env, config.eval_episodes, s);
        r.step = config.iql.gradient_steps;
        WriteFile(dir / "eval.json", EvalRecordJson(r) + "\n");
        return std::vector<fs::path>{dir / "eval.json"};
      });
    }
  }

  // Summary from whatever final evaluations exist.
  bool have_all = true;
  for (std::uint64_t s : config.seeds) {
    const fs::path p = seed_dir(s) / "eval.json";
    if (!fs::exists(p)) {
      have_all = false;
      continue;
    }
    summary.final_evals.push_back(ParseEvalRecord(Slurp(p)));
  }
  if (!summary.final_evals.empty()) {
    const double n = static_cast<double>(summary.final_evals.size());
    double var = 0.0;
    summary.all_full_horizon = have_all;
    for (const EvalRecord& r : summary.final_evals) {
      summary.mean_normalized += r.normalized / n;
      for (int steps : r.steps) summary.all_full_horizon &= steps == config.env.horizon;
    }
    for (const EvalRecord& r : summary.final_evals)
      var += (r.normalized - summary.mean_normalized) * (r.normalized - summary.mean_normalized);
    summary.std_normalized = std::sqrt(var / n);
  }
  if (fs::exists(data::SidecarPath(unlabeled))) {
    const data::GroundTruth gt = data::ReadGroundTruth(unlabeled);
    summary.behavior_mean_normalized = data::MeanNormalizedReturn(gt.returns, config.env.horizon);
  }

  if (Wants(config, "report")) {
    summary.aggregate_path = (root / "aggregate.csv").string();
    try {
      std::vector<std::string> metrics;
      for (std::uint64_t s : config.seeds) {
        const fs::path p = seed_dir(s) / "metrics.csv";
        RequireInput(p, "report", "train");
        metrics.push_back(p.string());
      }
      WriteFile(summary.aggregate_path, AggregateCsv(metrics));
      const Report report = MakeReport({summary.aggregate_path});
      char buf[160];
      std::snprintf(buf, sizeof buf, "behavior dataset mean normalized return: %.4f\n",
                    summary.behavior_mean_normalized);
      WriteFile(root / "report.txt", report.text + buf);
      json seeds = json::array();
      for (const EvalRecord& r : summary.final_evals)
        seeds.push_back({{"seed", r.seed}, {"normalized_return", r.normalized},
                         {"return_mean", r.return_mean}, {"episode_steps_mean", r.steps_mean}});
      WriteFile(root / "summary.json",
                json{{"final_evals", seeds},
                     {"mean_normalized_return", summary.mean_normalized},
                     {"std_normalized_return", summary.std_normalized},
                     {"behavior_mean_normalized_return", summary.behavior_mean_normalized},
                     {"all_episodes_full_horizon", summary.all_full_horizon}}
                        .dump(2) + "\n");
      say(report.text);
    } catch (const Error& e) {
      Fail(e.kind(), std::string("stage 'report' failed: ") + e.what());
    }
    summary.stages_run.push_back("report");
  }
  return summary;
}

}  // namespace otr::harness
