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

#include "otrlab/otrlab.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <json.hpp>
#include <new>
#include <ostream>
#include <streambuf>
#include <string>

#include "otrlab/error.hpp"
#include "otrlab/harness.hpp"

struct otrlab_config {
  otr::harness::ExperimentConfig value;
};
struct otrlab_policy {
  otr::iql::GaussianPolicy value;
};
struct otrlab_dataset {
  otr::data::Dataset value;
};

namespace {

using otr::ErrorKind;
namespace h = otr::harness;

thread_local std::string g_last_error;

otrlab_status StatusOf(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return OTRLAB_ERR_DIMENSION;
    case ErrorKind::kNumerical: return OTRLAB_ERR_NUMERICAL;
    case ErrorKind::kSize: return OTRLAB_ERR_SIZE;
    case ErrorKind::kState: return OTRLAB_ERR_STATE;
    case ErrorKind::kContract: return OTRLAB_ERR_CONTRACT;
    case ErrorKind::kConfig: return OTRLAB_ERR_CONFIG;
    case ErrorKind::kData: return OTRLAB_ERR_DATA;
    case ErrorKind::kIo: return OTRLAB_ERR_IO;
    case ErrorKind::kLabeling: return OTRLAB_ERR_LABELING;
  }
  return OTRLAB_ERR_INTERNAL;
}

struct NullArgument {
  std::string name;
};

void Need(const void* p, const char* name) {
  if (p == nullptr) throw NullArgument{name};
}

template <typename F>
otrlab_status Guard(F&& f) {
  g_last_error.clear();
  try {
    f();
    return OTRLAB_OK;
  } catch (const NullArgument& a) {
    g_last_error = a.name + " must not be NULL";
    return OTRLAB_ERR_ARGUMENT;
  } catch (const otr::Error& e) {
    g_last_error = e.what();
    return StatusOf(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return OTRLAB_ERR_INTERNAL;
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Forwards complete lines to a C callback.
class LineBuf : public std::streambuf {
 public:
  LineBuf(otrlab_log_fn fn, void* user) : fn_(fn), user_(user) {}
  ~LineBuf() override { Flush(); }

 protected:
  int_type overflow(int_type ch) override {
    if (ch == traits_type::eof()) return 0;
    if (ch == '\n') {
      Flush();
    } else {
      line_ += static_cast<char>(ch);
    }
    return ch;
  }

 private:
  void Flush() {
    if (!line_.empty()) fn_(line_.c_str(), user_);
    line_.clear();
  }
  otrlab_log_fn fn_;
  void* user_;
  std::string line_;
};

std::vector<std::string> Paths(const char* const* paths, size_t count) {
  if (count > 0) Need(paths, "path list");
  std::vector<std::string> out;
  for (size_t i = 0; i < count; ++i) {
    Need(paths[i], "path");
    out.emplace_back(paths[i]);
  }
  return out;
}

std::string Histogram(const std::vector<double>& values, const char* title) {
  if (values.empty()) return "";
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  constexpr int kBins = 10;
  int counts[kBins] = {};
  for (double v : values) {
    int b = hi > lo ? static_cast<int>((v - lo) / (hi - lo) * kBins) : 0;
    counts[std::clamp(b, 0, kBins - 1)]++;
  }
  std::string out = std::string(title) + " (" + std::to_string(values.size()) + " episodes)\n";
  char line[160];
  for (int b = 0; b < kBins; ++b) {
    const double a = lo + (hi - lo) * b / kBins, z = lo + (hi - lo) * (b + 1) / kBins;
    std::snprintf(line, sizeof line, "  [%9.3f, %9.3f] %4d %s\n", a, z, counts[b],
                  std::string(counts[b], '#').c_str());
    out += line;
    if (hi <= lo) break;
  }
  return out;
}

}  // namespace

extern "C" {

const char* otrlab_version(void) { return "1.0.0"; }

const char* otrlab_last_error(void) { return g_last_error.c_str(); }

const char* otrlab_status_name(otrlab_status s) {
  switch (s) {
    case OTRLAB_OK: return "ok";
    case OTRLAB_ERR_DIMENSION: return "dimension";
    case OTRLAB_ERR_NUMERICAL: return "numerical";
    case OTRLAB_ERR_SIZE: return "size";
    case OTRLAB_ERR_STATE: return "state";
    case OTRLAB_ERR_CONTRACT: return "contract";
    case OTRLAB_ERR_CONFIG: return "config";
    case OTRLAB_ERR_DATA: return "data";
    case OTRLAB_ERR_IO: return "io";
    case OTRLAB_ERR_LABELING: return "labeling";
    case OTRLAB_ERR_ARGUMENT: return "argument";
    case OTRLAB_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

int otrlab_exit_code(otrlab_status s) {
  switch (s) {
    case OTRLAB_OK: return 0;
    case OTRLAB_ERR_DIMENSION: return h::ExitCode(ErrorKind::kDimension);
    case OTRLAB_ERR_NUMERICAL: return h::ExitCode(ErrorKind::kNumerical);
    case OTRLAB_ERR_SIZE: return h::ExitCode(ErrorKind::kSize);
    case OTRLAB_ERR_STATE: return h::ExitCode(ErrorKind::kState);
    case OTRLAB_ERR_CONTRACT: return h::ExitCode(ErrorKind::kContract);
    case OTRLAB_ERR_CONFIG:
    case OTRLAB_ERR_ARGUMENT: return h::ExitCode(ErrorKind::kConfig);
    case OTRLAB_ERR_DATA: return h::ExitCode(ErrorKind::kData);
    case OTRLAB_ERR_IO: return h::ExitCode(ErrorKind::kIo);
    case OTRLAB_ERR_LABELING: return h::ExitCode(ErrorKind::kLabeling);
    case OTRLAB_ERR_INTERNAL: return 1;
  }
  return 1;
}

void otrlab_string_free(char* s) { std::free(s); }

otrlab_status otrlab_config_new(const char* profile, otrlab_config** out) {
  return Guard([&] {
    Need(out, "out");
    *out = nullptr;
    *out = new otrlab_config{h::Profile(profile ? profile : "desk")};
  });
}

otrlab_status otrlab_config_load(const char* path, otrlab_config** out) {
  return Guard([&] {
    Need(path, "path");
    Need(out, "out");
    *out = nullptr;
    *out = new otrlab_config{h::LoadConfig(path)};
  });
}

otrlab_status otrlab_config_parse(const char* json_text, otrlab_config** out) {
  return Guard([&] {
    Need(json_text, "json_text");
    Need(out, "out");
    *out = nullptr;
    *out = new otrlab_config{h::ParseConfig(json_text)};
  });
}

otrlab_status otrlab_config_set(otrlab_config* config, const char* key, const char* value) {
  return Guard([&] {
    Need(config, "config");
    Need(key, "key");
    Need(value, "value");
    h::ApplyOverride(config->value, key, value);
  });
}

otrlab_status otrlab_config_json(const otrlab_config* config, char** json_out) {
  return Guard([&] {
    Need(config, "config");
    Need(json_out, "json_out");
    *json_out = Dup(h::ConfigToJson(config->value));
  });
}

void otrlab_config_free(otrlab_config* config) { delete config; }

otrlab_status otrlab_dataset_read(const char* path, otrlab_dataset** out) {
  return Guard([&] {
    Need(path, "path");
    Need(out, "out");
    *out = nullptr;
    *out = new otrlab_dataset{otr::data::ReadDataset(path)};
  });
}

otrlab_status otrlab_dataset_info_get(const otrlab_dataset* dataset, otrlab_dataset_info* info) {
  return Guard([&] {
    Need(dataset, "dataset");
    Need(info, "info");
    const auto& m = dataset->value.manifest;
    *info = {};
    info->episode_count = m.episode_count;
    info->state_dim = m.state_dim;
    info->action_dim = m.action_dim;
    info->horizon = m.horizon;
    info->has_rewards = m.reward_status != otr::data::RewardStatus::kStripped;
    std::snprintf(info->reward_status, sizeof info->reward_status, "%s",
                  otr::data::RewardStatusName(m.reward_status));
  });
}

otrlab_status otrlab_dataset_describe(const otrlab_dataset* dataset, const char* path,
                                      char** text_out) {
  return Guard([&] {
    Need(dataset, "dataset");
    Need(text_out, "text_out");
    const auto& d = dataset->value;
    const auto& m = d.manifest;
    nlohmann::json j = {{"schema_version", m.schema_version},
                        {"env_tag", m.env_tag},
                        {"state_dim", m.state_dim},
                        {"action_dim", m.action_dim},
                        {"episode_count", m.episode_count},
                        {"horizon", m.horizon},
                        {"reward_status", otr::data::RewardStatusName(m.reward_status)},
                        {"generator_seeds", m.generator_seeds.size()},
                        {"generator", m.generator},
                        {"traj_checksum", m.traj_checksum}};
    std::string text = j.dump(2) + "\n";
    if (m.reward_status != otr::data::RewardStatus::kStripped) {
      std::vector<double> r;
      for (const auto& t : d.episodes) r.push_back(t.rewards->sum());
      text += Histogram(r, m.reward_status == otr::data::RewardStatus::kLabeled
                               ? "labeled episodic return"
                               : "ground-truth episodic return");
    }
    if (path != nullptr) {
      const std::string base = otr::data::BasePath(path);
      if (std::filesystem::exists(otr::data::SidecarPath(base))) {
        text += Histogram(otr::data::ReadGroundTruth(base).returns,
                          "ground-truth episodic return (sidecar)");
      }
    }
    *text_out = Dup(text);
  });
}

otrlab_status otrlab_dataset_export_json(const otrlab_dataset* dataset, char** json_out) {
  return Guard([&] {
    Need(dataset, "dataset");
    Need(json_out, "json_out");
    *json_out = Dup(otr::data::ExportJson(dataset->value).dump(2));
  });
}

void otrlab_dataset_free(otrlab_dataset* dataset) { delete dataset; }

otrlab_status otrlab_generate(const otrlab_config* config, const char* expert_base,
                              const char* unlabeled_base, double* expert_mean,
                              double* behavior_mean) {
  return Guard([&] {
    Need(config, "config");
    Need(expert_base, "expert_base");
    Need(unlabeled_base, "unlabeled_base");
    for (const char* p : {expert_base, unlabeled_base}) {
      const std::filesystem::path parent = std::filesystem::path(p).parent_path();
      if (!parent.empty()) std::filesystem::create_directories(parent);
    }
    const auto s = otr::data::GenerateCorpus(config->value.env, config->value.corpus,
                                             otr::data::BasePath(expert_base),
                                             otr::data::BasePath(unlabeled_base));
    if (expert_mean) *expert_mean = s.expert_mean_normalized;
    if (behavior_mean) *behavior_mean = s.behavior_mean_normalized;
  });
}

otrlab_status otrlab_strip(const char* in_path, const char* out_base, int* was_noop) {
  return Guard([&] {
    Need(in_path, "in_path");
    Need(out_base, "out_base");
    bool noop = false;
    const auto stripped = otr::data::StripRewards(otr::data::ReadDataset(in_path), &noop);
    otr::data::WriteDataset(out_base, stripped);
    if (was_noop) *was_noop = noop ? 1 : 0;
  });
}

otrlab_status otrlab_label(const otrlab_config* config, const char* expert_path,
                           const char* unlabeled_path, const char* out_base,
                           const char* report_path, int* labeled_count) {
  return Guard([&] {
    Need(config, "config");
    Need(expert_path, "expert_path");
    Need(unlabeled_path, "unlabeled_path");
    Need(out_base, "out_base");
    const auto out = h::LabelFiles(expert_path, unlabeled_path, otr::data::BasePath(out_base),
                                   config->value.label, report_path ? report_path : "");
    if (labeled_count) *labeled_count = static_cast<int>(out.trajectories.size());
  });
}

otrlab_status otrlab_train(const otrlab_config* config, const char* labeled_path,
                           const char* out_dir, uint64_t seed, otrlab_log_fn log, void* user) {
  return Guard([&] {
    Need(config, "config");
    Need(labeled_path, "labeled_path");
    Need(out_dir, "out_dir");
    if (log) {
      LineBuf buf(log, user);
      std::ostream os(&buf);
      h::TrainSeed(config->value, seed, labeled_path, out_dir, &os);
    } else {
      h::TrainSeed(config->value, seed, labeled_path, out_dir, nullptr);
    }
  });
}

otrlab_status otrlab_evaluate(const otrlab_config* config, const char* source, int episodes,
                              uint64_t seed, otrlab_eval_record* out, char** json_out) {
  return Guard([&] {
    Need(config, "config");
    Need(source, "source");
    Need(out, "out");
    const auto& env = config->value.env;
    const auto r = h::EvaluatePolicy(env, h::MakePolicy(env, source, seed), episodes, seed);
    *out = {};
    out->seed = seed;
    out->episodes = episodes;
    out->return_mean = r.return_mean;
    out->return_std = r.return_std;
    out->episode_steps_mean = r.steps_mean;
    out->normalized_return = r.normalized;
    out->all_full_horizon =
        std::all_of(r.steps.begin(), r.steps.end(), [&](int s) { return s == env.horizon; });
    if (json_out) *json_out = Dup(h::EvalRecordJson(r));
  });
}

otrlab_status otrlab_rollout(const otrlab_config* config, const char* source, int episodes,
                             uint64_t seed, const char* out_base, const char* svg_path,
                             double* mean_distance) {
  return Guard([&] {
    Need(config, "config");
    Need(source, "source");
    Need(out_base, "out_base");
    const auto d = h::Rollout(config->value.env, source, episodes, seed);
    const std::filesystem::path parent = std::filesystem::path(out_base).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    otr::data::WriteDataset(out_base, d);
    const auto paths = svg_path ? h::WritePaths(d.episodes, svg_path) : h::RenderPaths(d.episodes);
    if (mean_distance) *mean_distance = paths.overall_mean_distance;
  });
}

otrlab_status otrlab_render_paths(const char* const* dataset_paths, size_t count,
                                  const char* svg_path, double* mean_distance) {
  return Guard([&] {
    Need(svg_path, "svg_path");
    std::vector<otr::Trajectory> all;
    for (const auto& p : Paths(dataset_paths, count)) {
      auto d = otr::data::ReadDataset(p);
      for (auto& t : d.episodes) all.push_back(std::move(t));
    }
    const auto out = h::WritePaths(all, svg_path);
    if (mean_distance) *mean_distance = out.overall_mean_distance;
  });
}

otrlab_status otrlab_aggregate(const char* const* metrics_csvs, size_t count,
                               const char* out_path) {
  return Guard([&] {
    Need(out_path, "out_path");
    const std::string csv = h::AggregateCsv(Paths(metrics_csvs, count));
    std::FILE* f = std::fopen(out_path, "wb");
    if (!f) throw otr::Error(ErrorKind::kIo, std::string("cannot write ") + out_path);
    const bool ok = std::fwrite(csv.data(), 1, csv.size(), f) == csv.size();
    std::fclose(f);
    if (!ok) throw otr::Error(ErrorKind::kIo, std::string("write failed for ") + out_path);
  });
}

otrlab_status otrlab_report(const char* const* aggregate_csvs, size_t count, char** text_out) {
  return Guard([&] {
    Need(text_out, "text_out");
    *text_out = Dup(h::MakeReport(Paths(aggregate_csvs, count)).text);
  });
}

otrlab_status otrlab_run(const otrlab_config* config, otrlab_run_summary* out, otrlab_log_fn log,
                         void* user) {
  return Guard([&] {
    Need(config, "config");
    h::RunSummary s;
    if (log) {
      LineBuf buf(log, user);
      std::ostream os(&buf);
      s = h::RunExperiment(config->value, &os);
    } else {
      s = h::RunExperiment(config->value, nullptr);
    }
    if (out) {
      *out = {};
      out->stages_run = static_cast<int>(s.stages_run.size());
      out->stages_skipped = static_cast<int>(s.stages_skipped.size());
      out->seeds_evaluated = static_cast<int>(s.final_evals.size());
      out->mean_normalized_return = s.mean_normalized;
      out->std_normalized_return = s.std_normalized;
      out->behavior_mean_normalized_return = s.behavior_mean_normalized;
      out->all_full_horizon = s.all_full_horizon ? 1 : 0;
    }
  });
}

otrlab_status otrlab_policy_load(const char* path, otrlab_policy** out) {
  return Guard([&] {
    Need(path, "path");
    Need(out, "out");
    *out = nullptr;
    *out = new otrlab_policy{otr::iql::LoadPolicy(path)};
  });
}

otrlab_status otrlab_policy_dims(const otrlab_policy* policy, int* state_dim, int* action_dim) {
  return Guard([&] {
    Need(policy, "policy");
    if (state_dim) *state_dim = static_cast<int>(policy->value.state_dim());
    if (action_dim) *action_dim = static_cast<int>(policy->value.action_dim());
  });
}

otrlab_status otrlab_policy_act(const otrlab_policy* policy, const double* state,
                                size_t state_len, double* action, size_t action_len) {
  return Guard([&] {
    Need(policy, "policy");
    Need(state, "state");
    Need(action, "action");
    const auto& p = policy->value;
    if (action_len != static_cast<size_t>(p.action_dim()))
      throw otr::Error(ErrorKind::kDimension, "action buffer holds " + std::to_string(action_len) +
                                                  " values, policy produces " +
                                                  std::to_string(p.action_dim()));
    const Eigen::VectorXd s =
        Eigen::Map<const Eigen::VectorXd>(state, static_cast<Eigen::Index>(state_len));
    const Eigen::VectorXd a = otr::iql::Act(p, s, true);
    std::copy(a.data(), a.data() + a.size(), action);
  });
}

void otrlab_policy_free(otrlab_policy* policy) { delete policy; }

}  // extern "C"
