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

#include "otrlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "binio.hpp"
#include "otrlab/error.hpp"

namespace otr::data {

namespace {

constexpr char kMagic[8] = {'O', 'T', 'R', 'T', 'R', 'A', 'J', '\0'};
constexpr std::uint32_t kMaxString = 1u << 16;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void PutString(binio::Writer& w, const std::string& s) {
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
  w.PutBytes(s.data(), s.size());
}

std::string GetString(binio::Reader& r) {
  const auto n = r.Get<std::uint32_t>();
  Require(n <= kMaxString, ErrorKind::kData, "corrupt string length in " + r.path());
  std::string s(n, '\0');
  r.GetBytes(s.data(), n);
  return s;
}

void PutMatrix(binio::Writer& w, const Eigen::MatrixXd& m) {
  const RowMajor rm = m;
  w.PutDoubles(rm.data(), static_cast<std::size_t>(rm.size()));
}

Eigen::MatrixXd GetMatrix(binio::Reader& r, Eigen::Index rows, Eigen::Index cols) {
  const std::vector<double> v = r.GetDoubles();
  Require(v.size() == static_cast<std::size_t>(rows * cols), ErrorKind::kData,
          "array size does not match the episode shape in " + r.path());
  return Eigen::Map<const RowMajor>(v.data(), rows, cols);
}

std::string Hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

bool EndsWith(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path);
  Require(in.good(), ErrorKind::kIo, "cannot open for reading: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  Require(out.good(), ErrorKind::kIo, "cannot open for writing: " + path);
  out << text;
  out.close();
  Require(!out.fail(), ErrorKind::kIo, "write failed: " + path);
}

nlohmann::json ParseJson(const std::string& path) {
  try {
    return nlohmann::json::parse(ReadText(path));
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kData, "malformed JSON in " + path + ": " + e.what());
  }
}

}  // namespace

const char* RewardStatusName(RewardStatus status) {
  switch (status) {
    case RewardStatus::kLabeled: return "labeled";
    case RewardStatus::kStripped: return "stripped";
    case RewardStatus::kGroundTruth: return "ground_truth";
  }
  return "?";
}

RewardStatus ParseRewardStatus(const std::string& name) {
  if (name == "labeled") return RewardStatus::kLabeled;
  if (name == "stripped") return RewardStatus::kStripped;
  if (name == "ground_truth") return RewardStatus::kGroundTruth;
  Fail(ErrorKind::kData, "unknown reward_status '" + name + "'");
}

void SyncManifest(Dataset& d) {
  Manifest& m = d.manifest;
  m.episode_count = static_cast<int>(d.episodes.size());
  if (!d.episodes.empty()) {
    m.state_dim = static_cast<int>(d.episodes.front().state_dim());
    m.action_dim = static_cast<int>(d.episodes.front().action_dim());
    if (m.env_tag.empty()) m.env_tag = d.episodes.front().env_tag;
  }
  m.horizon = 0;
  for (const Trajectory& t : d.episodes) m.horizon = std::max<int>(m.horizon, t.transitions());
}

void ValidateDataset(const Dataset& d) {
  const Manifest& m = d.manifest;
  Require(m.schema_version == kSchemaVersion, ErrorKind::kData,
          "unsupported schema version " + std::to_string(m.schema_version));
  Require(m.episode_count == static_cast<int>(d.episodes.size()), ErrorKind::kData,
          "manifest reports " + std::to_string(m.episode_count) + " episodes, found " +
              std::to_string(d.episodes.size()));
  const bool want_rewards = m.reward_status != RewardStatus::kStripped;
  for (const Trajectory& t : d.episodes) {
    ValidateTrajectory(t);
    Require(t.state_dim() == m.state_dim && t.action_dim() == m.action_dim, ErrorKind::kData,
            "episode " + t.episode_id + " has dimensions that disagree with the manifest");
    Require(t.rewards.has_value() == want_rewards, ErrorKind::kData,
            "episode " + t.episode_id + (want_rewards ? " lacks rewards" : " carries rewards") +
                " but reward_status is " + RewardStatusName(m.reward_status));
  }
}

std::string BasePath(const std::string& path) {
  for (const char* ext : {".traj", ".manifest", ".gt.json"}) {
    if (EndsWith(path, ext)) return path.substr(0, path.size() - std::strlen(ext));
  }
  return path;
}

std::string SidecarPath(const std::string& base) { return BasePath(base) + ".gt.json"; }

void WriteDataset(const std::string& path, Dataset d) {
  const std::string base = BasePath(path);
  SyncManifest(d);
  ValidateDataset(d);
  const bool has_rewards = d.manifest.reward_status != RewardStatus::kStripped;
  {
    binio::Writer w(base + ".traj");
    w.PutBytes(kMagic, sizeof kMagic);
    w.Put<std::uint32_t>(kSchemaVersion);
    w.Put<std::uint32_t>(static_cast<std::uint32_t>(d.episodes.size()));
    w.Put<std::uint32_t>(static_cast<std::uint32_t>(d.manifest.state_dim));
    w.Put<std::uint32_t>(static_cast<std::uint32_t>(d.manifest.action_dim));
    w.Put<std::uint8_t>(has_rewards ? 1 : 0);
    for (const Trajectory& t : d.episodes) {
      PutString(w, t.episode_id);
      PutString(w, t.env_tag);
      w.Put<std::uint32_t>(static_cast<std::uint32_t>(t.length()));
      PutMatrix(w, t.states);
      PutMatrix(w, t.actions);
      if (has_rewards) w.PutDoubles(t.rewards->data(), static_cast<std::size_t>(t.rewards->size()));
    }
    w.Close();
  }
  const Manifest& m = d.manifest;
  nlohmann::json j = {
      {"schema_version", m.schema_version},
      {"env_tag", m.env_tag},
      {"state_dim", m.state_dim},
      {"action_dim", m.action_dim},
      {"episode_count", m.episode_count},
      {"horizon", m.horizon},
      {"generator_seeds", m.generator_seeds},
      {"reward_status", RewardStatusName(m.reward_status)},
      {"generator", m.generator},
      {"traj_checksum", FileChecksum(base + ".traj")},
  };
  WriteText(base + ".manifest", j.dump(2) + "\n");
}

Dataset ReadDataset(const std::string& path) {
  const std::string base = BasePath(path);
  Dataset d;
  Manifest& m = d.manifest;
  const nlohmann::json j = ParseJson(base + ".manifest");
  try {
    m.schema_version = j.at("schema_version").get<int>();
    Require(m.schema_version == kSchemaVersion, ErrorKind::kData,
            "unsupported schema version " + std::to_string(m.schema_version) + " in " + base +
                ".manifest");
    m.env_tag = j.at("env_tag").get<std::string>();
    m.state_dim = j.at("state_dim").get<int>();
    m.action_dim = j.at("action_dim").get<int>();
    m.episode_count = j.at("episode_count").get<int>();
    m.horizon = j.at("horizon").get<int>();
    m.generator_seeds = j.at("generator_seeds").get<std::vector<std::uint64_t>>();
    m.reward_status = ParseRewardStatus(j.at("reward_status").get<std::string>());
    m.generator = j.value("generator", nlohmann::json::object());
    m.traj_checksum = j.at("traj_checksum").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kData, "bad manifest " + base + ".manifest: " + e.what());
  }
  Require(FileChecksum(base + ".traj") == m.traj_checksum, ErrorKind::kData,
          "checksum mismatch between " + base + ".traj and its manifest");

  binio::Reader r(base + ".traj");
  char magic[8];
  r.GetBytes(magic, sizeof magic);
  Require(std::memcmp(magic, kMagic, sizeof magic) == 0, ErrorKind::kData,
          "not a trajectory file: " + base + ".traj");
  Require(r.Get<std::uint32_t>() == kSchemaVersion, ErrorKind::kData,
          "unsupported record version in " + base + ".traj");
  const auto count = r.Get<std::uint32_t>();
  const auto sd = r.Get<std::uint32_t>();
  const auto ad = r.Get<std::uint32_t>();
  const bool has_rewards = r.Get<std::uint8_t>() != 0;
  Require(static_cast<int>(count) == m.episode_count && static_cast<int>(sd) == m.state_dim &&
              static_cast<int>(ad) == m.action_dim,
          ErrorKind::kData, "record header disagrees with manifest for " + base);
  d.episodes.reserve(count);
  for (std::uint32_t e = 0; e < count; ++e) {
    Trajectory t;
    t.episode_id = GetString(r);
    t.env_tag = GetString(r);
    const auto len = r.Get<std::uint32_t>();
    Require(len >= 1, ErrorKind::kData, "empty episode in " + base + ".traj");
    t.states = GetMatrix(r, len, sd);
    t.actions = GetMatrix(r, len - 1, ad);
    if (has_rewards) {
      const std::vector<double> v = r.GetDoubles();
      Require(v.size() == len - 1, ErrorKind::kData, "reward count mismatch in " + base + ".traj");
      t.rewards = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    d.episodes.push_back(std::move(t));
  }
  Require(r.AtEnd(), ErrorKind::kData, "trailing bytes in " + base + ".traj");
  ValidateDataset(d);
  return d;
}

nlohmann::json ExportJson(const Dataset& d) {
  auto rows = [](const Eigen::MatrixXd& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(m.cols());
      for (Eigen::Index k = 0; k < m.cols(); ++k) row[k] = m(i, k);
      out.push_back(row);
    }
    return out;
  };
  nlohmann::json eps = nlohmann::json::array();
  for (const Trajectory& t : d.episodes) {
    nlohmann::json e = {{"episode_id", t.episode_id},
                        {"env_tag", t.env_tag},
                        {"states", rows(t.states)},
                        {"actions", rows(t.actions)}};
    if (t.rewards) e["rewards"] = std::vector<double>(t.rewards->begin(), t.rewards->end());
    eps.push_back(std::move(e));
  }
  return {{"reward_status", RewardStatusName(d.manifest.reward_status)},
          {"env_tag", d.manifest.env_tag},
          {"episodes", eps}};
}

Dataset StripRewards(const Dataset& d, bool* was_noop) {
  Dataset out = d;
  const bool noop = d.manifest.reward_status == RewardStatus::kStripped;
  if (was_noop) *was_noop = noop;
  if (noop) return out;
  for (Trajectory& t : out.episodes) t.rewards.reset();
  out.manifest.reward_status = RewardStatus::kStripped;
  return out;
}

void WriteGroundTruth(const std::string& base, const GroundTruth& truth) {
  Require(truth.episode_ids.size() == truth.returns.size(), ErrorKind::kData,
          "ground truth ids and returns differ in length");
  nlohmann::json j = {{"episode_ids", truth.episode_ids},
                      {"returns", truth.returns},
                      {"horizon", truth.horizon},
                      {"episode_notes", truth.episode_notes}};
  WriteText(SidecarPath(base), j.dump(2) + "\n");
}

GroundTruth ReadGroundTruth(const std::string& base) {
  const std::string path = SidecarPath(base);
  const nlohmann::json j = ParseJson(path);
  GroundTruth g;
  try {
    g.episode_ids = j.at("episode_ids").get<std::vector<std::string>>();
    g.returns = j.at("returns").get<std::vector<double>>();
    g.horizon = j.at("horizon").get<int>();
    g.episode_notes = j.value("episode_notes", nlohmann::json::array());
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kData, "bad ground-truth sidecar " + path + ": " + e.what());
  }
  Require(g.episode_ids.size() == g.returns.size(), ErrorKind::kData,
          "ground truth ids and returns differ in length in " + path);
  return g;
}

double MeanNormalizedReturn(const std::vector<double>& returns, int horizon) {
  Require(!returns.empty() && horizon > 0, ErrorKind::kContract,
          "normalized mean needs returns and a positive horizon");
  double s = 0.0;
  for (double r : returns) s += std::clamp(r / horizon, 0.0, 1.0);
  return s / static_cast<double>(returns.size());
}

namespace {

struct MixturePlan {
  double sigma = 0.0;
  double fraction = 0.0;
};

// Expert actions with Gaussian noise, interrupted by held random actions.
class MixturePolicy {
 public:
  MixturePolicy(const env::EnvConfig& env_config, const CorpusConfig& c, MixturePlan plan,
                std::uint64_t seed)
      : env_(env_config), cfg_(c), plan_(plan), rng_(seed) {
    const double mean_len = 0.5 * (c.segment_min + c.segment_max);
    start_prob_ = plan.fraction <= 0.0 ? 0.0
                                       : std::min(1.0, plan.fraction / (mean_len * (1.0 - plan.fraction)));
  }

  env::Action operator()(const env::Observation& obs) {
    const Eigen::Vector3d bounds = env::ActionBounds(env_);
    if (remaining_ == 0 && std::bernoulli_distribution(start_prob_)(rng_)) {
      remaining_ = std::uniform_int_distribution<int>(cfg_.segment_min, cfg_.segment_max)(rng_);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      held_ = Eigen::Vector3d(u(rng_), u(rng_), u(rng_)).cwiseProduct(bounds);
    }
    if (remaining_ > 0) {
      --remaining_;
      return env::Action::FromVector(held_);
    }
    Eigen::VectorXd a = env::ScriptedExpert(env_, obs).ToVector();
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < 3; ++k) a(k) += plan_.sigma * bounds(k) * n(rng_);
    return env::ClampAction(env_, env::Action::FromVector(a));
  }

 private:
  const env::EnvConfig& env_;
  const CorpusConfig& cfg_;
  MixturePlan plan_;
  std::mt19937_64 rng_;
  double start_prob_ = 0.0;
  int remaining_ = 0;
  Eigen::Vector3d held_ = Eigen::Vector3d::Zero();
};

std::string EpisodeId(const char* prefix, int i) {
  std::ostringstream os;
  os << prefix << '-' << std::setw(4) << std::setfill('0') << i;
  return os.str();
}

void WriteStrippedWithTruth(const std::string& base, std::vector<Trajectory> episodes,
                            std::vector<std::uint64_t> seeds, nlohmann::json generator,
                            nlohmann::json notes, int horizon, double* mean_normalized) {
  GroundTruth truth;
  truth.horizon = horizon;
  truth.episode_notes = std::move(notes);
  for (const Trajectory& t : episodes) {
    truth.episode_ids.push_back(t.episode_id);
    truth.returns.push_back(t.rewards->sum());
  }
  Dataset d;
  d.manifest.env_tag = env::kEnvTag;
  d.manifest.generator_seeds = std::move(seeds);
  d.manifest.generator = std::move(generator);
  d.manifest.reward_status = RewardStatus::kGroundTruth;
  d.episodes = std::move(episodes);
  WriteDataset(base, StripRewards(d));
  WriteGroundTruth(base, truth);
  *mean_normalized = MeanNormalizedReturn(truth.returns, horizon);
}

}  // namespace

CorpusSummary GenerateCorpus(const env::EnvConfig& env_config, const CorpusConfig& c,
                             const std::string& expert_base, const std::string& unlabeled_base) {
  Require(c.expert_episodes >= 1 && c.unlabeled_episodes >= 1, ErrorKind::kConfig,
          "episode counts must be >= 1");
  Require(!c.noise_sigmas.empty() && !c.random_fractions.empty(), ErrorKind::kConfig,
          "noise schedule must list at least one sigma and one random fraction");
  Require(c.segment_min >= 1 && c.segment_max >= c.segment_min, ErrorKind::kConfig,
          "random segment lengths must satisfy 1 <= min <= max");
  for (double f : c.random_fractions) {
    Require(f >= 0.0 && f < 1.0, ErrorKind::kConfig, "random fractions must lie in [0, 1)");
  }
  CorpusSummary summary;
  summary.expert_base = BasePath(expert_base);
  summary.unlabeled_base = BasePath(unlabeled_base);

  const nlohmann::json env_json = {{"horizon", env_config.horizon},
                                   {"lap_period", env_config.lap_period},
                                   {"side_length", env_config.side_length},
                                   {"v_max", env_config.v_max},
                                   {"yaw_rate_max", env_config.yaw_rate_max},
                                   {"expert_kp", env_config.expert_kp},
                                   {"expert_ktheta", env_config.expert_ktheta}};

  std::vector<Trajectory> experts;
  std::vector<std::uint64_t> expert_seeds;
  for (int i = 0; i < c.expert_episodes; ++i) {
    const std::uint64_t s = DeriveSeed(c.seed, 1, i);
    expert_seeds.push_back(s);
    experts.push_back(env::RolloutEpisode(
        env_config, [&](const env::Observation& o) { return env::ScriptedExpert(env_config, o); },
        s, EpisodeId("expert", i)));
  }
  WriteStrippedWithTruth(summary.expert_base, std::move(experts), expert_seeds,
                         {{"policy", "scripted_expert"}, {"env", env_json}},
                         nlohmann::json::array(), env_config.horizon,
                         &summary.expert_mean_normalized);

  std::vector<Trajectory> unlabeled;
  std::vector<std::uint64_t> seeds;
  nlohmann::json notes = nlohmann::json::array();
  for (int i = 0; i < c.unlabeled_episodes; ++i) {
    const std::uint64_t s = DeriveSeed(c.seed, 2, i);
    seeds.push_back(s);
    std::mt19937_64 pick(DeriveSeed(c.seed, 3, i));
    MixturePlan plan;
    plan.sigma = c.noise_sigmas[std::uniform_int_distribution<std::size_t>(0, c.noise_sigmas.size() - 1)(pick)];
    plan.fraction = c.random_fractions[std::uniform_int_distribution<std::size_t>(
        0, c.random_fractions.size() - 1)(pick)];
    MixturePolicy policy(env_config, c, plan, DeriveSeed(c.seed, 4, i));
    unlabeled.push_back(env::RolloutEpisode(env_config, std::ref(policy), s, EpisodeId("unlabeled", i)));
    notes.push_back({{"sigma", plan.sigma}, {"random_fraction", plan.fraction}});
  }
  const nlohmann::json generator = {
      {"policy", "noisy_expert_mixture"},
      {"note", "synthetic suboptimal data; noise schedule chosen for return diversity"},
      {"noise_sigmas", c.noise_sigmas},
      {"random_fractions", c.random_fractions},
      {"segment_min", c.segment_min},
      {"segment_max", c.segment_max},
      {"env", env_json}};
  WriteStrippedWithTruth(summary.unlabeled_base, std::move(unlabeled), seeds, generator, notes,
                         env_config.horizon, &summary.behavior_mean_normalized);
  return summary;
}

TransitionBatch BuildTransitions(const Dataset& d) {
  Require(d.manifest.reward_status == RewardStatus::kLabeled, ErrorKind::kContract,
          std::string("training needs a labeled dataset but reward_status is ") +
              RewardStatusName(d.manifest.reward_status) + "; run `otrlab label` first");
  Eigen::Index n = 0;
  for (const Trajectory& t : d.episodes) n += t.transitions();
  Require(n > 0, ErrorKind::kData, "dataset has no transitions");
  const Eigen::Index sd = d.manifest.state_dim, ad = d.manifest.action_dim;
  TransitionBatch b;
  b.states.resize(n, sd);
  b.next_states.resize(n, sd);
  b.actions.resize(n, ad);
  b.rewards.resize(n);
  b.dones = Eigen::VectorXd::Zero(n);
  Eigen::Index row = 0;
  for (const Trajectory& t : d.episodes) {
    const Eigen::Index k = t.transitions();
    if (k == 0) continue;
    b.states.middleRows(row, k) = t.states.topRows(k);
    b.next_states.middleRows(row, k) = t.states.bottomRows(k);
    b.actions.middleRows(row, k) = t.actions;
    b.rewards.segment(row, k) = *t.rewards;
    b.dones(row + k - 1) = 1.0;
    row += k;
  }
  return b;
}

TransitionBatch SampleBatch(const TransitionBatch& all, std::mt19937_64& rng, int size) {
  Require(size >= 1 && size <= all.size(), ErrorKind::kContract,
          "batch size must be in [1, " + std::to_string(all.size()) + "], got " + std::to_string(size));
  std::uniform_int_distribution<Eigen::Index> pick(0, all.size() - 1);
  TransitionBatch b;
  b.states.resize(size, all.states.cols());
  b.next_states.resize(size, all.next_states.cols());
  b.actions.resize(size, all.actions.cols());
  b.rewards.resize(size);
  b.dones.resize(size);
  for (int i = 0; i < size; ++i) {
    const Eigen::Index j = pick(rng);
    b.states.row(i) = all.states.row(j);
    b.next_states.row(i) = all.next_states.row(j);
    b.actions.row(i) = all.actions.row(j);
    b.rewards(i) = all.rewards(j);
    b.dones(i) = all.dones(j);
  }
  return b;
}

std::uint64_t Fnv1a64(const void* data, std::size_t n, std::uint64_t hash) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    hash ^= p[i];
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::string FileChecksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorKind::kIo, "cannot open for reading: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h = Fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return Hex(h);
}

std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace otr::data
