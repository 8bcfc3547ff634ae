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

#include <cstring>

#include "binio.hpp"
#include "otrlab/nn.hpp"

namespace otr::nn {

namespace {
constexpr char kMagic[8] = {'O', 'T', 'R', 'M', 'L', 'P', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

// Layout: magic[8] | u32 version | u64 seed | u32 in | u32 out | u32 n_hidden
//         | u32 hidden[n_hidden] | f64-array params | f64-array extra
void SaveMlp(const std::string& path, const MlpParams& params, const Vector& extra) {
  binio::Writer w(path);
  w.PutBytes(kMagic, sizeof(kMagic));
  w.Put(kVersion);
  w.Put<std::uint64_t>(params.seed);
  w.Put<std::uint32_t>(params.in_dim());
  w.Put<std::uint32_t>(params.out_dim());
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(params.hidden.size()));
  for (int h : params.hidden) w.Put<std::uint32_t>(h);
  const Vector flat = Flatten(params);
  w.PutDoubles(flat.data(), flat.size());
  w.PutDoubles(extra.data(), extra.size());
  w.Close();
}

MlpParams LoadMlp(const std::string& path, Vector* extra) {
  binio::Reader r(path);
  char magic[8];
  r.GetBytes(magic, sizeof(magic));
  Require(std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, ErrorKind::kData,
          "not a network checkpoint: " + path);
  const auto version = r.Get<std::uint32_t>();
  Require(version == kVersion, ErrorKind::kData,
          "unsupported checkpoint version " + std::to_string(version) + " in " + path);
  const auto seed = r.Get<std::uint64_t>();
  const auto in_dim = r.Get<std::uint32_t>();
  const auto out_dim = r.Get<std::uint32_t>();
  const auto n_hidden = r.Get<std::uint32_t>();
  Require(n_hidden < 64, ErrorKind::kData, "corrupt checkpoint header: " + path);
  std::vector<int> hidden(n_hidden);
  for (auto& h : hidden) h = static_cast<int>(r.Get<std::uint32_t>());
  MlpParams params = InitMlp(seed, static_cast<int>(in_dim), static_cast<int>(out_dim), hidden);
  const auto flat = r.GetDoubles();
  Require(flat.size() == params.parameter_count(), ErrorKind::kData,
          "checkpoint parameter count mismatch: " + path);
  Unflatten(Eigen::Map<const Vector>(flat.data(), flat.size()), params);
  const auto aux = r.GetDoubles();
  if (extra) *extra = Eigen::Map<const Vector>(aux.data(), aux.size());
  return params;
}

}  // namespace otr::nn
