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

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "otrlab/otrlab.h"

namespace {

struct Failure {
  otrlab_status status;
};

void Check(otrlab_status s) {
  if (s != OTRLAB_OK) throw Failure{s};
}

struct ConfigDeleter {
  void operator()(otrlab_config* c) const { otrlab_config_free(c); }
};
using ConfigPtr = std::unique_ptr<otrlab_config, ConfigDeleter>;

std::string Take(char* s) {
  std::string out = s ? s : "";
  otrlab_string_free(s);
  return out;
}

void PrintLine(const char* line, void*) {
  std::fprintf(stderr, "%s\n", line);
  std::fflush(stderr);
}

std::vector<const char*> CStrings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

std::string JoinList(const std::vector<std::string>& v, bool quote) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += quote ? "\"" + v[i] + "\"" : v[i];
  }
  return out + "]";
}

// Options shared by every subcommand that needs a configuration.
struct ConfigOptions {
  std::string file;
  std::string profile = "desk";
  std::vector<std::string> sets;

  void Attach(CLI::App* app) {
    app->add_option("-c,--config", file, "JSON configuration file");
    app->add_option("--profile", profile, "base profile when no file is given (desk|full)");
    app->add_option("--set", sets, "override a key, e.g. --set iql.gradient_steps=1000");
  }

  ConfigPtr Build(const std::vector<std::pair<std::string, std::string>>& extra = {}) const {
    otrlab_config* raw = nullptr;
    Check(file.empty() ? otrlab_config_new(profile.c_str(), &raw)
                       : otrlab_config_load(file.c_str(), &raw));
    ConfigPtr c(raw);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "--set expects key=value, got '%s'\n", kv.c_str());
        throw Failure{OTRLAB_ERR_CONFIG};
      }
      Check(otrlab_config_set(c.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
    for (const auto& [k, v] : extra) Check(otrlab_config_set(c.get(), k.c_str(), v.c_str()));
    return c;
  }
};

template <typename T>
void Maybe(std::vector<std::pair<std::string, std::string>>& extra, const char* key,
           const std::optional<T>& v) {
  if (!v) return;
  if constexpr (std::is_same_v<T, std::string>) {
    extra.emplace_back(key, *v);
  } else {
    extra.emplace_back(key, std::to_string(*v));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"otrlab: optimal-transport reward labeling and offline RL on a planar tracking task"};
  app.require_subcommand(1);
  app.set_version_flag("--version", otrlab_version());
  std::function<void()> action;

  // gen
  ConfigOptions gen_cfg;
  std::string gen_expert = "data/expert", gen_unlabeled = "data/unlabeled";
  std::optional<int> gen_n_expert, gen_n_unlabeled, gen_horizon;
  std::optional<std::uint64_t> gen_seed;
  auto* gen = app.add_subcommand("gen", "generate expert and unlabeled corpora");
  gen_cfg.Attach(gen);
  gen->add_option("--expert", gen_expert, "expert dataset base path")->capture_default_str();
  gen->add_option("--unlabeled", gen_unlabeled, "unlabeled dataset base path")->capture_default_str();
  gen->add_option("--expert-episodes", gen_n_expert, "number of expert episodes");
  gen->add_option("--unlabeled-episodes", gen_n_unlabeled, "number of unlabeled episodes");
  gen->add_option("--horizon", gen_horizon, "episode horizon");
  gen->add_option("--seed", gen_seed, "corpus seed");
  gen->callback([&] {
    action = [&] {
      std::vector<std::pair<std::string, std::string>> extra;
      Maybe(extra, "corpus.expert_episodes", gen_n_expert);
      Maybe(extra, "corpus.unlabeled_episodes", gen_n_unlabeled);
      Maybe(extra, "env.horizon", gen_horizon);
      Maybe(extra, "corpus.seed", gen_seed);
      auto c = gen_cfg.Build(extra);
      double em = 0, bm = 0;
      Check(otrlab_generate(c.get(), gen_expert.c_str(), gen_unlabeled.c_str(), &em, &bm));
      std::printf("expert: %s (mean normalized return %.4f)\n", gen_expert.c_str(), em);
      std::printf("unlabeled: %s (behavior mean normalized return %.4f, rewards stripped)\n",
                  gen_unlabeled.c_str(), bm);
    };
  });

  // strip
  std::string strip_in, strip_out;
  auto* strip = app.add_subcommand("strip", "remove rewards from a dataset");
  strip->add_option("input", strip_in, "dataset to strip")->required();
  strip->add_option("output", strip_out, "output base path")->required();
  strip->callback([&] {
    action = [&] {
      int noop = 0;
      Check(otrlab_strip(strip_in.c_str(), strip_out.c_str(), &noop));
      if (noop) std::fprintf(stderr, "warning: %s was already stripped\n", strip_in.c_str());
      std::printf("wrote %s\n", strip_out.c_str());
    };
  });

  // inspect
  std::string inspect_path;
  bool inspect_json = false;
  auto* inspect = app.add_subcommand("inspect", "print a dataset manifest and return histogram");
  inspect->add_option("dataset", inspect_path, "dataset path")->required();
  inspect->add_flag("--json", inspect_json, "dump every episode as JSON instead");
  inspect->callback([&] {
    action = [&] {
      otrlab_dataset* d = nullptr;
      Check(otrlab_dataset_read(inspect_path.c_str(), &d));
      std::unique_ptr<otrlab_dataset, void (*)(otrlab_dataset*)> guard(d, otrlab_dataset_free);
      char* text = nullptr;
      Check(inspect_json ? otrlab_dataset_export_json(d, &text)
                         : otrlab_dataset_describe(d, inspect_path.c_str(), &text));
      std::printf("%s\n", Take(text).c_str());
    };
  });

  // label
  ConfigOptions label_cfg;
  std::string label_expert = "data/expert", label_unlabeled = "data/unlabeled",
              label_out = "data/labeled", label_report;
  std::optional<std::string> label_metric, label_solver;
  std::optional<double> label_eps, label_alpha, label_beta;
  auto* label = app.add_subcommand("label", "label unlabeled trajectories with OT rewards");
  label_cfg.Attach(label);
  label->add_option("--expert", label_expert, "expert dataset")->capture_default_str();
  label->add_option("--unlabeled", label_unlabeled, "unlabeled dataset")->capture_default_str();
  label->add_option("-o,--out", label_out, "labeled dataset base path")->capture_default_str();
  label->add_option("--report", label_report, "labeling report (JSON)");
  label->add_option("--metric", label_metric, "squared_euclidean|euclidean|cosine");
  label->add_option("--solver", label_solver, "sinkhorn|exact");
  label->add_option("--epsilon", label_eps, "entropic regularization");
  label->add_option("--alpha", label_alpha, "squashing scale");
  label->add_option("--beta", label_beta, "squashing rate");
  label->callback([&] {
    action = [&] {
      std::vector<std::pair<std::string, std::string>> extra;
      Maybe(extra, "label.metric", label_metric);
      Maybe(extra, "label.solver", label_solver);
      if (label_eps) extra.emplace_back("label.epsilon", std::to_string(*label_eps));
      if (label_alpha) extra.emplace_back("label.alpha", std::to_string(*label_alpha));
      if (label_beta) extra.emplace_back("label.beta", std::to_string(*label_beta));
      auto c = label_cfg.Build(extra);
      const std::string report = label_report.empty() ? label_out + ".report.json" : label_report;
      int n = 0;
      Check(otrlab_label(c.get(), label_expert.c_str(), label_unlabeled.c_str(), label_out.c_str(),
                         report.c_str(), &n));
      std::printf("labeled %d trajectories -> %s (report %s)\n", n, label_out.c_str(),
                  report.c_str());
    };
  });

  // rollout
  ConfigOptions roll_cfg;
  std::string roll_policy = "expert", roll_out = "rollouts/rollout", roll_svg;
  int roll_episodes = 1;
  std::uint64_t roll_seed = 0;
  auto* rollout = app.add_subcommand("rollout", "roll out a policy and save trajectories");
  roll_cfg.Attach(rollout);
  rollout->add_option("--policy", roll_policy, "expert|random|<checkpoint>")->capture_default_str();
  rollout->add_option("--episodes", roll_episodes, "episode count")->capture_default_str();
  rollout->add_option("--seed", roll_seed, "rollout seed")->capture_default_str();
  rollout->add_option("-o,--out", roll_out, "output dataset base path")->capture_default_str();
  rollout->add_option("--svg", roll_svg, "also write a path plot");
  rollout->callback([&] {
    action = [&] {
      auto c = roll_cfg.Build();
      double dist = 0;
      Check(otrlab_rollout(c.get(), roll_policy.c_str(), roll_episodes, roll_seed,
                           roll_out.c_str(), roll_svg.empty() ? nullptr : roll_svg.c_str(), &dist));
      std::printf("wrote %s; mean camera-to-cube distance %.4f\n", roll_out.c_str(), dist);
    };
  });

  // train
  ConfigOptions train_cfg;
  std::string train_data = "data/labeled", train_out = "runs/train";
  std::uint64_t train_seed = 0;
  std::optional<int> train_steps;
  auto* train = app.add_subcommand("train", "train an IQL policy on a labeled dataset");
  train_cfg.Attach(train);
  train->add_option("--data", train_data, "labeled dataset")->capture_default_str();
  train->add_option("-o,--out", train_out, "output directory")->capture_default_str();
  train->add_option("--seed", train_seed, "training seed")->capture_default_str();
  train->add_option("--steps", train_steps, "gradient steps");
  train->callback([&] {
    action = [&] {
      std::vector<std::pair<std::string, std::string>> extra;
      Maybe(extra, "iql.gradient_steps", train_steps);
      auto c = train_cfg.Build(extra);
      Check(otrlab_train(c.get(), train_data.c_str(), train_out.c_str(), train_seed, PrintLine,
                         nullptr));
      std::printf("checkpoints and metrics in %s\n", train_out.c_str());
    };
  });

  // eval
  ConfigOptions eval_cfg;
  std::string eval_policy = "expert";
  int eval_episodes = 10;
  std::uint64_t eval_seed = 0;
  bool eval_json = false;
  auto* eval = app.add_subcommand("eval", "evaluate a policy with deterministic rollouts");
  eval_cfg.Attach(eval);
  eval->add_option("--policy", eval_policy, "expert|random|<checkpoint>")->capture_default_str();
  eval->add_option("--episodes", eval_episodes, "episode count")->capture_default_str();
  eval->add_option("--seed", eval_seed, "evaluation seed")->capture_default_str();
  eval->add_flag("--json", eval_json, "print the full record as JSON");
  eval->callback([&] {
    action = [&] {
      auto c = eval_cfg.Build();
      otrlab_eval_record r{};
      char* js = nullptr;
      Check(otrlab_evaluate(c.get(), eval_policy.c_str(), eval_episodes, eval_seed, &r,
                            eval_json ? &js : nullptr));
      if (eval_json) {
        std::printf("%s\n", Take(js).c_str());
      } else {
        std::printf("return %.3f +/- %.3f, episode steps %.1f, normalized %.4f\n", r.return_mean,
                    r.return_std, r.episode_steps_mean, r.normalized_return);
      }
    };
  });

  // paths
  std::vector<std::string> paths_in;
  std::string paths_out = "paths.svg";
  auto* paths = app.add_subcommand("paths", "plot camera and cube paths as SVG");
  paths->add_option("datasets", paths_in, "trajectory datasets")->required();
  paths->add_option("-o,--out", paths_out, "SVG output")->capture_default_str();
  paths->callback([&] {
    action = [&] {
      auto ptrs = CStrings(paths_in);
      double dist = 0;
      Check(otrlab_render_paths(ptrs.data(), ptrs.size(), paths_out.c_str(), &dist));
      std::printf("wrote %s; mean camera-to-cube distance %.4f\n", paths_out.c_str(), dist);
    };
  });

  // report
  std::vector<std::string> report_in, report_metrics;
  std::string report_agg_out = "aggregate.csv";
  auto* report = app.add_subcommand("report", "summarize aggregate CSVs");
  report->add_option("aggregates", report_in, "aggregate CSV files");
  report->add_option("--metrics", report_metrics,
                     "per-seed metrics CSVs to aggregate first (written to --aggregate-out)");
  report->add_option("--aggregate-out", report_agg_out, "where --metrics aggregation goes")
      ->capture_default_str();
  report->callback([&] {
    action = [&] {
      std::vector<std::string> inputs = report_in;
      if (!report_metrics.empty()) {
        auto m = CStrings(report_metrics);
        Check(otrlab_aggregate(m.data(), m.size(), report_agg_out.c_str()));
        inputs.push_back(report_agg_out);
      }
      auto ptrs = CStrings(inputs);
      char* text = nullptr;
      Check(otrlab_report(ptrs.data(), ptrs.size(), &text));
      std::printf("%s", Take(text).c_str());
    };
  });

  // run
  ConfigOptions run_cfg;
  std::optional<std::string> run_out;
  std::vector<std::string> run_stages, run_seeds;
  auto* run = app.add_subcommand("run", "run the staged pipeline gen -> label -> train -> eval -> report");
  run_cfg.Attach(run);
  run->add_option("-o,--out", run_out, "output directory");
  run->add_option("--stages", run_stages, "subset of gen,label,train,eval,report")->delimiter(',');
  run->add_option("--seeds", run_seeds, "training seeds")->delimiter(',');
  run->callback([&] {
    action = [&] {
      std::vector<std::pair<std::string, std::string>> extra;
      if (run_out) extra.emplace_back("experiment.output_dir", "\"" + *run_out + "\"");
      if (!run_stages.empty()) extra.emplace_back("experiment.stages", JoinList(run_stages, true));
      if (!run_seeds.empty()) extra.emplace_back("experiment.seeds", JoinList(run_seeds, false));
      auto c = run_cfg.Build(extra);
      otrlab_run_summary s{};
      Check(otrlab_run(c.get(), &s, PrintLine, nullptr));
      std::printf("stages run %d, skipped %d\n", s.stages_run, s.stages_skipped);
      if (s.seeds_evaluated > 0) {
        std::printf("final normalized return %.4f +/- %.4f over %d seeds (behavior %.4f)%s\n",
                    s.mean_normalized_return, s.std_normalized_return, s.seeds_evaluated,
                    s.behavior_mean_normalized_return,
                    s.all_full_horizon ? "" : "; some episodes ended early");
      }
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : otrlab_exit_code(OTRLAB_ERR_CONFIG);
  }
  try {
    if (action) action();
  } catch (const Failure& f) {
    std::fprintf(stderr, "otrlab: %s error: %s\n", otrlab_status_name(f.status),
                 otrlab_last_error());
    return otrlab_exit_code(f.status);
  }
  return 0;
}
