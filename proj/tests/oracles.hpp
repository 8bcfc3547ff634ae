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

// Test-only reference computations. None of these call into the code paths
// they are used to check.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Per-neuron scalar loops over a ReLU network given as (weights in x out,
// biases) pairs.
inline std::vector<double> NaiveForward(const std::vector<Matrix>& weights,
                                        const std::vector<Vector>& biases,
                                        const std::vector<double>& input) {
  std::vector<double> x = input;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    std::vector<double> y(weights[l].cols());
    for (int o = 0; o < weights[l].cols(); ++o) {
      double acc = biases[l](o);
      for (int i = 0; i < weights[l].rows(); ++i) acc += x[i] * weights[l](i, o);
      y[o] = (l + 1 < weights.size()) ? std::max(acc, 0.0) : acc;
    }
    x = std::move(y);
  }
  return x;
}

// Central finite-difference gradient of f at x.
inline Vector FiniteDifference(const std::function<double(const Vector&)>& f,
                               Vector x, double h = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x(i);
    x(i) = saved + h;
    const double up = f(x);
    x(i) = saved - h;
    const double down = f(x);
    x(i) = saved;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

// Mixed relative/absolute agreement: |a-b| <= rel * max(1, |a|, |b|).
inline bool GradientsAgree(const Vector& analytic, const Vector& numeric, double rel,
                           double* worst = nullptr) {
  double w = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({1.0, std::abs(analytic(i)), std::abs(numeric(i))});
    w = std::max(w, std::abs(analytic(i) - numeric(i)) / scale);
  }
  if (worst) *worst = w;
  return w <= rel;
}

struct VertexOptimum {
  double cost = std::numeric_limits<double>::infinity();
  Matrix plan;
};

// Minimum of sum(c * mu) over every basic feasible solution of the uniform
// transportation polytope, found by enumerating all (m + n - 1)-cell spanning
// trees of the bipartite graph and solving each tree's flows by leaf peeling.
inline VertexOptimum EnumerateVertices(const Matrix& c) {
  const int m = static_cast<int>(c.rows()), n = static_cast<int>(c.cols());
  const int cells = m * n, k = m + n - 1;
  VertexOptimum best;
  std::vector<int> pick(k);
  std::iota(pick.begin(), pick.end(), 0);
  auto evaluate = [&]() {
    std::vector<int> parent(m + n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
    for (int idx : pick) {
      const int a = find(idx / n), b = find(m + idx % n);
      if (a == b) return;
      parent[a] = b;
    }
    std::vector<double> supply(m, 1.0 / m), demand(n, 1.0 / n);
    std::vector<bool> used(k, false);
    Matrix plan = Matrix::Zero(m, n);
    for (int round = 0; round < k; ++round) {
      std::vector<int> deg(m + n, 0);
      for (int e = 0; e < k; ++e)
        if (!used[e]) { ++deg[pick[e] / n]; ++deg[m + pick[e] % n]; }
      int leaf_edge = -1;
      bool row_leaf = false;
      for (int e = 0; e < k && leaf_edge < 0; ++e) {
        if (used[e]) continue;
        if (deg[pick[e] / n] == 1) { leaf_edge = e; row_leaf = true; }
        else if (deg[m + pick[e] % n] == 1) { leaf_edge = e; row_leaf = false; }
      }
      const int i = pick[leaf_edge] / n, j = pick[leaf_edge] % n;
      const double x = row_leaf ? supply[i] : demand[j];
      plan(i, j) = x;
      supply[i] -= x;
      demand[j] -= x;
      used[leaf_edge] = true;
    }
    if ((plan.array() < -1e-12).any()) return;
    const double cost = (c.array() * plan.array()).sum();
    if (cost < best.cost) {
      best.cost = cost;
      best.plan = plan;
    }
  };
  while (true) {
    evaluate();
    int i = k - 1;
    while (i >= 0 && pick[i] == cells - k + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < k; ++j) pick[j] = pick[j - 1] + 1;
  }
  return best;
}

inline std::vector<double> Ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t a = 0; a < order.size();) {
    std::size_t b = a;
    while (b + 1 < order.size() && v[order[b + 1]] == v[order[a]]) ++b;
    for (std::size_t t = a; t <= b; ++t) r[order[t]] = 0.5 * static_cast<double>(a + b);
    a = b + 1;
  }
  return r;
}

// Spearman rank correlation (Pearson on average ranks).
inline double Spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = Ranks(a), rb = Ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace oracle
