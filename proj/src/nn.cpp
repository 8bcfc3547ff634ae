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

#include "otrlab/nn.hpp"

#include <cmath>
#include <random>

#include "otrlab/error.hpp"

namespace otr::nn {

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += weights[l].size() + biases[l].size();
  return n;
}

MlpGradients MlpGradients::ZerosLike(const MlpParams& params) {
  MlpGradients g;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    g.weights.push_back(Matrix::Zero(params.weights[l].rows(), params.weights[l].cols()));
    g.biases.push_back(Vector::Zero(params.biases[l].size()));
  }
  return g;
}

MlpGradients& MlpGradients::operator+=(const MlpGradients& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

MlpGradients& MlpGradients::operator*=(double scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] *= scale;
    biases[l] *= scale;
  }
  return *this;
}

namespace {

// Haar-style orthogonal matrix of shape rows x cols: orthonormal columns when
// rows >= cols, orthonormal rows otherwise.
Matrix Orthogonal(std::mt19937_64& rng, int rows, int cols, double gain) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int tall = std::max(rows, cols);
  const int thin = std::min(rows, cols);
  Matrix a(tall, thin);
  for (int j = 0; j < thin; ++j)
    for (int i = 0; i < tall; ++i) a(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(tall, thin);
  const Matrix& r = qr.matrixQR();
  for (int j = 0; j < thin; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  q *= gain;
  if (rows >= cols) return q;
  return q.transpose();
}

void CheckLayerDims(int in_dim, int out_dim, std::span<const int> hidden) {
  Require(in_dim >= 1 && out_dim >= 1, ErrorKind::kDimension,
          "network input/output dimensions must be >= 1");
  for (int h : hidden)
    Require(h >= 1, ErrorKind::kDimension, "hidden layer width must be >= 1");
}

}  // namespace

MlpParams InitMlp(std::uint64_t seed, int in_dim, int out_dim,
                  std::span<const int> hidden, double output_gain) {
  CheckLayerDims(in_dim, out_dim, hidden);
  MlpParams p;
  p.seed = seed;
  p.hidden.assign(hidden.begin(), hidden.end());
  std::mt19937_64 rng(seed);
  int prev = in_dim;
  for (std::size_t l = 0; l <= hidden.size(); ++l) {
    const bool last = l == hidden.size();
    const int next = last ? out_dim : hidden[l];
    p.weights.push_back(Orthogonal(rng, prev, next, last ? output_gain : 1.0));
    p.biases.push_back(Vector::Zero(next));
    prev = next;
  }
  return p;
}

Matrix ForwardBatch(const MlpParams& params, const Matrix& inputs,
                    ForwardCache* cache) {
  Require(inputs.cols() == params.in_dim(), ErrorKind::kDimension,
          "forward: input has " + std::to_string(inputs.cols()) +
              " columns, network expects " + std::to_string(params.in_dim()));
  if (cache) {
    cache->layer_inputs.clear();
    cache->pre_activations.clear();
  }
  Matrix x = inputs;
  const std::size_t n = params.num_layers();
  for (std::size_t l = 0; l < n; ++l) {
    Matrix z(x.rows(), params.weights[l].cols());
    z.noalias() = x * params.weights[l];
    z.rowwise() += params.biases[l].transpose();
    if (cache) cache->layer_inputs.push_back(std::move(x));
    if (l + 1 == n) return z;
    x = z.cwiseMax(0.0);
    if (cache) cache->pre_activations.push_back(std::move(z));
  }
  return x;  // unreachable: a network always has an output layer
}

Vector Forward(const MlpParams& params, const Vector& input) {
  Require(input.size() == params.in_dim(), ErrorKind::kDimension,
          "forward: input length " + std::to_string(input.size()) +
              " != network input dimension " + std::to_string(params.in_dim()));
  return ForwardBatch(params, input.transpose()).row(0).transpose();
}

BackwardResult Backward(const MlpParams& params, const ForwardCache& cache,
                        const Matrix& output_grad) {
  const std::size_t n = params.num_layers();
  Require(cache.layer_inputs.size() == n, ErrorKind::kDimension,
          "backward: cache does not belong to this network");
  Require(output_grad.cols() == params.out_dim() &&
              output_grad.rows() == cache.layer_inputs.front().rows(),
          ErrorKind::kDimension, "backward: output gradient shape mismatch");
  BackwardResult result;
  result.params.weights.resize(n);
  result.params.biases.resize(n);
  Matrix delta = output_grad;
  for (std::size_t l = n; l-- > 0;) {
    result.params.weights[l].noalias() = cache.layer_inputs[l].transpose() * delta;
    result.params.biases[l] = delta.colwise().sum().transpose();
    Matrix prev(delta.rows(), params.weights[l].rows());
    prev.noalias() = delta * params.weights[l].transpose();
    if (l > 0) {
      const Matrix& z = cache.pre_activations[l - 1];
      prev = (z.array() > 0.0).select(prev, 0.0);
    }
    delta = std::move(prev);
  }
  result.input_grad = std::move(delta);
  return result;
}

BackwardResult Backward(const MlpParams& params, const Vector& input,
                        const Vector& output_grad) {
  Require(output_grad.size() == params.out_dim(), ErrorKind::kDimension,
          "backward: output gradient length mismatch");
  ForwardCache cache;
  ForwardBatch(params, input.transpose(), &cache);
  return Backward(params, cache, output_grad.transpose());
}

void AdamUpdate(Eigen::Ref<Eigen::ArrayXd> param,
                const Eigen::Ref<const Eigen::ArrayXd>& grad,
                Eigen::Ref<Eigen::ArrayXd> first_moment,
                Eigen::Ref<Eigen::ArrayXd> second_moment, std::int64_t step,
                const AdamConfig& c) {
  first_moment = c.beta1 * first_moment + (1.0 - c.beta1) * grad;
  second_moment = c.beta2 * second_moment + (1.0 - c.beta2) * grad.square();
  const double t = static_cast<double>(step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  param -= c.learning_rate * (first_moment / bc1) /
           ((second_moment / bc2).sqrt() + c.epsilon);
}

AdamState AdamState::For(const MlpParams& params, const AdamConfig& config) {
  return AdamState{MlpGradients::ZerosLike(params),
                   MlpGradients::ZerosLike(params), 0, config};
}

namespace {
Eigen::Map<Eigen::ArrayXd> AsArray(Matrix& m) {
  return Eigen::Map<Eigen::ArrayXd>(m.data(), m.size());
}
Eigen::Map<const Eigen::ArrayXd> AsArray(const Matrix& m) {
  return Eigen::Map<const Eigen::ArrayXd>(m.data(), m.size());
}
}  // namespace

void AdamStep(MlpParams& params, const MlpGradients& grads, AdamState& state) {
  const std::size_t n = params.num_layers();
  Require(grads.weights.size() == n && state.first_moment.weights.size() == n,
          ErrorKind::kDimension, "adam: gradient/state layer count mismatch");
  for (std::size_t l = 0; l < n; ++l) {
    Require(grads.weights[l].rows() == params.weights[l].rows() &&
                grads.weights[l].cols() == params.weights[l].cols() &&
                grads.biases[l].size() == params.biases[l].size(),
            ErrorKind::kDimension, "adam: gradient shape mismatch at layer " + std::to_string(l));
    if (!grads.weights[l].allFinite())
      Fail(ErrorKind::kNumerical, "adam: non-finite gradient in weights[" + std::to_string(l) + "]");
    if (!grads.biases[l].allFinite())
      Fail(ErrorKind::kNumerical, "adam: non-finite gradient in biases[" + std::to_string(l) + "]");
  }
  const std::int64_t step = ++state.step_count;
  for (std::size_t l = 0; l < n; ++l) {
    AdamUpdate(AsArray(params.weights[l]), AsArray(grads.weights[l]),
               AsArray(state.first_moment.weights[l]),
               AsArray(state.second_moment.weights[l]), step, state.config);
    AdamUpdate(params.biases[l].array(), grads.biases[l].array(),
               state.first_moment.biases[l].array(),
               state.second_moment.biases[l].array(), step, state.config);
  }
}

void SoftUpdate(MlpParams& target, const MlpParams& online, double tau) {
  Require(target.num_layers() == online.num_layers(), ErrorKind::kDimension,
          "soft update: network shapes differ");
  for (std::size_t l = 0; l < target.num_layers(); ++l) {
    target.weights[l] = (1.0 - tau) * target.weights[l] + tau * online.weights[l];
    target.biases[l] = (1.0 - tau) * target.biases[l] + tau * online.biases[l];
  }
}

namespace {
template <typename P>
Vector FlattenImpl(const P& p) {
  std::size_t n = 0;
  for (std::size_t l = 0; l < p.weights.size(); ++l)
    n += p.weights[l].size() + p.biases[l].size();
  Vector flat(n);
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    flat.segment(at, p.weights[l].size()) = AsArray(p.weights[l]).matrix();
    at += p.weights[l].size();
    flat.segment(at, p.biases[l].size()) = p.biases[l];
    at += p.biases[l].size();
  }
  return flat;
}
}  // namespace

Vector Flatten(const MlpParams& params) { return FlattenImpl(params); }
Vector Flatten(const MlpGradients& grads) { return FlattenImpl(grads); }

void Unflatten(const Vector& flat, MlpParams& params) {
  Require(static_cast<std::size_t>(flat.size()) == params.parameter_count(),
          ErrorKind::kDimension, "unflatten: parameter count mismatch");
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    AsArray(params.weights[l]) = flat.segment(at, params.weights[l].size()).array();
    at += params.weights[l].size();
    params.biases[l] = flat.segment(at, params.biases[l].size());
    at += params.biases[l].size();
  }
}

}  // namespace otr::nn
