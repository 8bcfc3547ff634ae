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

// Discrete optimal transport between uniform empirical distributions.
//
// Sinkhorn solves the entropy-regularized problem with scaling iterations that
// fall back to log-domain updates (and absorb large scalings into potentials)
// whenever the kernel under- or overflows. ExactOt solves the unregularized
// linear program with the transportation simplex and serves as the reference
// for small instances.

#include <Eigen/Dense>
#include <string>
#include <string_view>

namespace otr::ot {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Metric { kSquaredEuclidean, kEuclidean, kCosine };

Metric ParseMetric(std::string_view name);
std::string_view MetricName(Metric metric);

// Uniform Dirac mixture over the rows of `support`.
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(Matrix support);

  const Matrix& support() const { return support_; }
  Eigen::Index size() const { return support_.rows(); }
  Eigen::Index dim() const { return support_.cols(); }
  Vector masses() const;

 private:
  Matrix support_;
};

// Per-dimension affine map to zero mean / unit variance. Scales below
// `min_scale` are raised to it so constant dimensions stay finite.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer Fit(const Matrix& states, double min_scale = 1e-6);
  static Standardizer Identity(Eigen::Index dim);
  Matrix Apply(const Matrix& states) const;
};

// T x T' matrix of finite, nonnegative costs.
class CostMatrix {
 public:
  explicit CostMatrix(Matrix entries);

  const Matrix& entries() const { return entries_; }
  Eigen::Index rows() const { return entries_.rows(); }
  Eigen::Index cols() const { return entries_.cols(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

 private:
  Matrix entries_;
};

CostMatrix BuildCostMatrix(const EmpiricalDistribution& unlabeled,
                           const EmpiricalDistribution& expert,
                           Metric metric = Metric::kSquaredEuclidean);

struct TransportPlan {
  Matrix coupling;
  Vector row_marginal;
  Vector col_marginal;

  // L1 distance of the coupling's row and column sums to the marginals.
  double MarginalViolation() const;
};

struct OtResult {
  TransportPlan plan;
  double transport_cost = 0.0;  // sum of cost * coupling
  bool converged = true;
  double marginal_violation = 0.0;
  int iterations = 0;
};

struct SinkhornOptions {
  double epsilon = 0.01;
  int max_iters = 1000;
  double tol = 1e-6;
};

// Non-convergence is reported through `converged`; NaNs throw kNumerical.
OtResult Sinkhorn(const CostMatrix& cost, const SinkhornOptions& options = {});

inline constexpr Eigen::Index kExactOtMaxCells = 10000;

// Exact optimum for uniform marginals. Instances with more than
// kExactOtMaxCells cells throw kSize.
OtResult ExactOt(const CostMatrix& cost);

enum class Solver { kSinkhorn, kExact };

double WassersteinSq(const EmpiricalDistribution& unlabeled,
                     const EmpiricalDistribution& expert, Solver solver,
                     Metric metric = Metric::kSquaredEuclidean,
                     const SinkhornOptions& options = {});

// JSON text with the cost matrix, coupling and marginals for inspection.
std::string DumpAlignment(const CostMatrix& cost, const OtResult& result);

}  // namespace otr::ot
