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

#pragma once

// Dense ReLU networks with an analytic backward pass and Adam. Batched entry
// points take one sample per row; all arithmetic is double precision.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace otr::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr int kDefaultHidden[] = {256, 256};

// Weights are stored in x out so a row-batch maps as X * W + b.
struct MlpParams {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  std::vector<int> hidden;
  std::uint64_t seed = 0;

  int in_dim() const { return static_cast<int>(weights.front().rows()); }
  int out_dim() const { return static_cast<int>(weights.back().cols()); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;

  bool operator==(const MlpParams&) const = default;
};

// Same layout as MlpParams, holding d(loss)/d(param).
struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static MlpGradients ZerosLike(const MlpParams& params);
  MlpGradients& operator+=(const MlpGradients& other);
  MlpGradients& operator*=(double scale);
};

MlpParams InitMlp(std::uint64_t seed, int in_dim, int out_dim,
                  std::span<const int> hidden = kDefaultHidden,
                  double output_gain = 1.0);

// Intermediate values kept by ForwardBatch for Backward.
struct ForwardCache {
  std::vector<Matrix> layer_inputs;  // input seen by each layer
  std::vector<Matrix> pre_activations;  // hidden layers only
};

Matrix ForwardBatch(const MlpParams& params, const Matrix& inputs,
                    ForwardCache* cache = nullptr);
Vector Forward(const MlpParams& params, const Vector& input);

struct BackwardResult {
  MlpGradients params;
  Matrix input_grad;
};

// `output_grad` is d(loss)/d(output) per row. ReLU'(0) is taken as 0.
BackwardResult Backward(const MlpParams& params, const ForwardCache& cache,
                        const Matrix& output_grad);
BackwardResult Backward(const MlpParams& params, const Vector& input,
                        const Vector& output_grad);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected Adam update on a flat tensor. `step` is the 1-based
// count after incrementing.
void AdamUpdate(Eigen::Ref<Eigen::ArrayXd> param,
                const Eigen::Ref<const Eigen::ArrayXd>& grad,
                Eigen::Ref<Eigen::ArrayXd> first_moment,
                Eigen::Ref<Eigen::ArrayXd> second_moment, std::int64_t step,
                const AdamConfig& config);

struct AdamState {
  MlpGradients first_moment;
  MlpGradients second_moment;
  std::int64_t step_count = 0;
  AdamConfig config;

  static AdamState For(const MlpParams& params, const AdamConfig& config = {});
};

// Throws kNumerical naming the offending tensor if any gradient is non-finite;
// in that case neither params nor state are modified.
void AdamStep(MlpParams& params, const MlpGradients& grads, AdamState& state);

// target <- (1 - tau) * target + tau * online
void SoftUpdate(MlpParams& target, const MlpParams& online, double tau);

Vector Flatten(const MlpParams& params);
Vector Flatten(const MlpGradients& grads);
void Unflatten(const Vector& flat, MlpParams& params);

// Checkpoint file: versioned little-endian binary, bit-exact round trip.
// `extra` carries auxiliary per-network values (e.g. a policy log-std).
void SaveMlp(const std::string& path, const MlpParams& params,
             const Vector& extra = Vector());
MlpParams LoadMlp(const std::string& path, Vector* extra = nullptr);

}  // namespace otr::nn
