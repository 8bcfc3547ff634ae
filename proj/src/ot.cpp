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

#include "otrlab/ot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include <json.hpp>

#include "otrlab/error.hpp"

namespace otr::ot {

Metric ParseMetric(std::string_view name) {
  if (name == "squared_euclidean") return Metric::kSquaredEuclidean;
  if (name == "euclidean") return Metric::kEuclidean;
  if (name == "cosine") return Metric::kCosine;
  Fail(ErrorKind::kConfig, "unknown cost metric '" + std::string(name) + "'");
}

std::string_view MetricName(Metric metric) {
  switch (metric) {
    case Metric::kSquaredEuclidean: return "squared_euclidean";
    case Metric::kEuclidean: return "euclidean";
    case Metric::kCosine: return "cosine";
  }
  return "unknown";
}

EmpiricalDistribution::EmpiricalDistribution(Matrix support)
    : support_(std::move(support)) {
  Require(support_.rows() > 0 && support_.cols() > 0, ErrorKind::kDimension,
          "empirical distribution needs a nonempty support");
  Require(support_.allFinite(), ErrorKind::kNumerical,
          "empirical distribution support contains non-finite values");
}

Vector EmpiricalDistribution::masses() const {
  return Vector::Constant(size(), 1.0 / static_cast<double>(size()));
}

Standardizer Standardizer::Fit(const Matrix& states, double min_scale) {
  Require(states.rows() > 0, ErrorKind::kDimension, "cannot standardize zero states");
  Standardizer s;
  s.mean = states.colwise().mean().transpose();
  const Matrix centered = states.rowwise() - s.mean.transpose();
  s.scale = (centered.array().square().colwise().sum() / static_cast<double>(states.rows()))
                .sqrt()
                .max(min_scale)
                .transpose();
  return s;
}

Standardizer Standardizer::Identity(Eigen::Index dim) {
  return {Vector::Zero(dim), Vector::Ones(dim)};
}

Matrix Standardizer::Apply(const Matrix& states) const {
  Require(states.cols() == mean.size(), ErrorKind::kDimension,
          "standardizer dimension mismatch");
  return (states.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

CostMatrix::CostMatrix(Matrix entries) : entries_(std::move(entries)) {
  Require(entries_.rows() > 0 && entries_.cols() > 0, ErrorKind::kDimension,
          "cost matrix must be nonempty");
  Require(entries_.allFinite(), ErrorKind::kNumerical, "cost matrix has non-finite entries");
  Require((entries_.array() >= 0.0).all(), ErrorKind::kNumerical,
          "cost matrix has negative entries");
}

CostMatrix BuildCostMatrix(const EmpiricalDistribution& unlabeled,
                           const EmpiricalDistribution& expert, Metric metric) {
  Require(unlabeled.dim() == expert.dim(), ErrorKind::kDimension,
          "state dimension mismatch: " + std::to_string(unlabeled.dim()) + " vs " +
              std::to_string(expert.dim()));
  const Matrix& x = unlabeled.support();
  const Matrix& y = expert.support();
  Matrix c(x.rows(), y.rows());
  switch (metric) {
    case Metric::kSquaredEuclidean:
    case Metric::kEuclidean:
      for (Eigen::Index j = 0; j < y.rows(); ++j)
        c.col(j) = (x.rowwise() - y.row(j)).rowwise().squaredNorm();
      if (metric == Metric::kEuclidean) c = c.cwiseSqrt();
      break;
    case Metric::kCosine: {
      const Vector nx = x.rowwise().norm();
      const Vector ny = y.rowwise().norm();
      c.noalias() = x * y.transpose();
      for (Eigen::Index i = 0; i < c.rows(); ++i)
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
          const double denom = nx(i) * ny(j);
          const double sim = denom > 0.0 ? c(i, j) / denom : 0.0;
          c(i, j) = 1.0 - std::clamp(sim, -1.0, 1.0);
        }
      break;
    }
  }
  return CostMatrix(std::move(c));
}

double TransportPlan::MarginalViolation() const {
  return (coupling.rowwise().sum() - row_marginal).cwiseAbs().sum() +
         (coupling.colwise().sum().transpose() - col_marginal).cwiseAbs().sum();
}

namespace {

double LogSumExp(const Eigen::Ref<const Vector>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// Log-domain Sinkhorn state: coupling = diag(u) K diag(v) with
// K = exp((f + g - C) / eps).
class SinkhornSolver {
 public:
  SinkhornSolver(const Matrix& c, double eps)
      : c_(c), eps_(eps),
        log_p_(Vector::Constant(c.rows(), -std::log(static_cast<double>(c.rows())))),
        log_q_(Vector::Constant(c.cols(), -std::log(static_cast<double>(c.cols())))),
        p_(log_p_.array().exp()), q_(log_q_.array().exp()),
        f_(Vector::Zero(c.rows())), g_(Vector::Zero(c.cols())) {
    LogDomainStep();
  }

  // One scaling iteration; returns false if NaN appeared.
  bool Iterate() {
    Vector kv = k_ * v_;
    if (!Healthy(kv)) {
      Absorb();
      LogDomainStep();
      return f_.allFinite() && g_.allFinite();
    }
    u_ = p_.array() / kv.array();
    Vector ktu = k_.transpose() * u_;
    if (!Healthy(ktu)) {
      Absorb();
      LogDomainStep();
      return f_.allFinite() && g_.allFinite();
    }
    v_ = q_.array() / ktu.array();
    if (u_.maxCoeff() > kAbsorbAbove || v_.maxCoeff() > kAbsorbAbove ||
        u_.minCoeff() < 1.0 / kAbsorbAbove || v_.minCoeff() < 1.0 / kAbsorbAbove) {
      Absorb();
      RebuildKernel();
    }
    return u_.allFinite() && v_.allFinite();
  }

  // Warm start at a new regularization strength from the current potentials.
  void SetEpsilon(double eps) {
    Absorb();
    eps_ = eps;
    LogDomainStep();
  }

  double Violation() const {
    const Vector rows = u_.cwiseProduct(k_ * v_);
    const Vector cols = v_.cwiseProduct(k_.transpose() * u_);
    return (rows - p_).cwiseAbs().sum() + (cols - q_).cwiseAbs().sum();
  }

  // Damped Newton step on the dual of the entropic problem, with the last
  // column potential held fixed to remove the constant-shift null space.
  // Backtracks until the marginal violation drops; returns false otherwise.
  bool NewtonStep() {
    Absorb();
    RebuildKernel();
    const Eigen::Index n = c_.cols();
    const Matrix& plan = k_;
    const Vector rows = plan.rowwise().sum();
    const Vector cols = plan.colwise().sum().transpose();
    const Vector grad_f = p_ - rows, grad_g = q_ - cols;
    const double merit = grad_f.cwiseAbs().sum() + grad_g.cwiseAbs().sum();
    if (n == 1 || (rows.array() <= 0.0).any()) return false;

    const Matrix scaled = plan.transpose() * rows.cwiseInverse().asDiagonal();
    Matrix schur = -scaled * plan;
    schur.diagonal() += cols;
    // Tiny ridge keeps nearly disconnected supports solvable.
    schur.diagonal().array() += 1e-12 * cols.maxCoeff();
    const Vector rhs = eps_ * (grad_g - scaled * grad_f);
    Vector dg = Vector::Zero(n);
    Eigen::LDLT<Matrix> ldlt(schur.topLeftCorner(n - 1, n - 1));
    if (ldlt.info() != Eigen::Success) return false;
    dg.head(n - 1) = ldlt.solve(rhs.head(n - 1));
    const Vector df = (eps_ * grad_f - plan * dg).cwiseQuotient(rows);
    if (!df.allFinite() || !dg.allFinite()) return false;

    // Armijo on the (concave) dual objective; near the optimum its changes
    // drown in rounding, so a drop in marginal violation also accepts.
    const double slope = grad_f.dot(df) + grad_g.dot(dg);
    const double dual0 = Dual();
    const Vector f0 = f_, g0 = g_;
    double step = 1.0;
    for (int k = 0; k < 40; ++k, step *= 0.5) {
      f_ = f0 + step * df;
      g_ = g0 + step * dg;
      RebuildKernel();
      if (!k_.allFinite()) continue;
      if (Dual() >= dual0 + 1e-4 * step * slope || Violation() < merit) return true;
    }
    f_ = f0;
    g_ = g0;
    RebuildKernel();
    return false;
  }

  Matrix Coupling() const { return u_.asDiagonal() * k_ * v_.asDiagonal(); }
  const Vector& p() const { return p_; }
  const Vector& q() const { return q_; }

 private:
  static constexpr double kAbsorbAbove = 1e50;

  // Valid only right after RebuildKernel (u = v = 1).
  double Dual() const { return f_.dot(p_) + g_.dot(q_) - eps_ * k_.sum(); }

  static bool Healthy(const Vector& s) {
    return s.allFinite() && s.minCoeff() > std::numeric_limits<double>::min();
  }

  void Absorb() {
    f_ += eps_ * u_.array().log().matrix();
    g_ += eps_ * v_.array().log().matrix();
  }

  // Exact log-domain row then column normalization.
  void LogDomainStep() {
    for (Eigen::Index i = 0; i < c_.rows(); ++i)
      f_(i) = eps_ * log_p_(i) -
              eps_ * LogSumExp((g_ - c_.row(i).transpose()) / eps_);
    for (Eigen::Index j = 0; j < c_.cols(); ++j)
      g_(j) = eps_ * log_q_(j) - eps_ * LogSumExp((f_ - c_.col(j)) / eps_);
    RebuildKernel();
  }

  void RebuildKernel() {
    k_ = ((-c_).colwise() + f_).rowwise() + g_.transpose();
    k_ = (k_.array() / eps_).exp().matrix();
    u_ = Vector::Ones(c_.rows());
    v_ = Vector::Ones(c_.cols());
  }

  const Matrix& c_;
  double eps_;
  Vector log_p_, log_q_, p_, q_;
  Vector f_, g_;
  Vector u_, v_;
  Matrix k_;
};

}  // namespace

OtResult Sinkhorn(const CostMatrix& cost, const SinkhornOptions& options) {
  Require(options.epsilon > 0.0, ErrorKind::kConfig, "sinkhorn epsilon must be > 0");
  Require(options.max_iters >= 1, ErrorKind::kConfig, "sinkhorn max_iters must be >= 1");
  Require(options.tol > 0.0, ErrorKind::kConfig, "sinkhorn tol must be > 0");
  constexpr int kCheckEvery = 10;
  constexpr int kStageIters = 20;
  constexpr int kPlainIters = 100;

  // Epsilon scaling: anneal from the cost range down to the target, a few
  // iterations per stage. The fixed point at the target epsilon is unchanged.
  const double range = cost.entries().maxCoeff() - cost.entries().minCoeff();
  std::vector<double> schedule;
  for (double e = range; e > options.epsilon; e *= 0.5) schedule.push_back(e);
  std::reverse(schedule.begin(), schedule.end());

  SinkhornSolver solver(cost.entries(),
                        schedule.empty() ? options.epsilon : schedule.back());
  OtResult result;
  result.converged = false;
  int it = 0;
  while (!schedule.empty() && it < options.max_iters) {
    for (int k = 0; k < kStageIters && it < options.max_iters; ++k) {
      ++it;
      if (!solver.Iterate())
        Fail(ErrorKind::kNumerical, "sinkhorn: NaN in iterates at iteration " + std::to_string(it));
    }
    schedule.pop_back();
    solver.SetEpsilon(schedule.empty() ? options.epsilon : schedule.back());
  }
  // Plain scaling iterations, then Newton polishing if they stall; scaling
  // resumes if a Newton step cannot make progress.
  auto scaling_until = [&](int limit) {
    while (it < limit) {
      ++it;
      if (!solver.Iterate())
        Fail(ErrorKind::kNumerical, "sinkhorn: NaN in iterates at iteration " + std::to_string(it));
      if ((it % kCheckEvery == 0 || it == options.max_iters) && solver.Violation() < options.tol)
        return true;
    }
    return false;
  };
  result.converged = scaling_until(std::min(options.max_iters, it + kPlainIters));
  while (!result.converged && it < options.max_iters) {
    ++it;
    if (!solver.NewtonStep()) break;
    result.converged = solver.Violation() < options.tol;
  }
  if (!result.converged) result.converged = scaling_until(options.max_iters);
  result.iterations = it;
  result.plan.coupling = solver.Coupling();
  result.plan.row_marginal = solver.p();
  result.plan.col_marginal = solver.q();
  Require(result.plan.coupling.allFinite(), ErrorKind::kNumerical,
          "sinkhorn: non-finite transport plan");
  result.marginal_violation = result.plan.MarginalViolation();
  result.converged = result.converged && result.marginal_violation < options.tol;
  result.transport_cost = cost.entries().cwiseProduct(result.plan.coupling).sum();
  return result;
}

namespace {

// Transportation simplex on integer supplies/demands. The basis is a spanning
// tree over row nodes [0, m) and column nodes [m, m + n) with m + n - 1 cells.
class TransportationSimplex {
 public:
  TransportationSimplex(const Matrix& cost, std::vector<std::int64_t> supply,
                        std::vector<std::int64_t> demand)
      : c_(cost), m_(cost.rows()), n_(cost.cols()),
        flow_(Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(m_, n_)),
        basic_(Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(m_, n_, false)) {
    NorthWestCorner(std::move(supply), std::move(demand));
  }

  void Solve() {
    const double scale = 1.0 + c_.cwiseAbs().maxCoeff();
    const double tol = 1e-12 * scale;
    const long max_pivots = 50 * (m_ + n_) * (m_ * n_) + 1000;
    long degenerate_streak = 0;
    bool bland = false;
    for (long pivot = 0; pivot < max_pivots; ++pivot) {
      ComputePotentials();
      Eigen::Index ei = -1, ej = -1;
      double best = -tol;
      for (Eigen::Index i = 0; i < m_ && !(bland && ei >= 0); ++i)
        for (Eigen::Index j = 0; j < n_; ++j) {
          if (basic_(i, j)) continue;
          const double reduced = c_(i, j) - u_[i] - v_[j];
          if (reduced < best) {
            best = bland ? -tol : reduced;
            ei = i;
            ej = j;
            if (bland) break;
          }
        }
      if (ei < 0) return;
      const bool moved = PivotOn(ei, ej);
      degenerate_streak = moved ? 0 : degenerate_streak + 1;
      if (degenerate_streak > m_ * n_) bland = true;
    }
    Fail(ErrorKind::kNumerical, "exact OT: transportation simplex did not terminate");
  }

  const auto& flow() const { return flow_; }

 private:
  void NorthWestCorner(std::vector<std::int64_t> supply, std::vector<std::int64_t> demand) {
    Eigen::Index i = 0, j = 0;
    while (i < m_ && j < n_) {
      const std::int64_t x = std::min(supply[i], demand[j]);
      flow_(i, j) = x;
      basic_(i, j) = true;
      supply[i] -= x;
      demand[j] -= x;
      // Advance exactly one index per cell so the basis keeps m + n - 1 cells;
      // on a tie the row moves and the column keeps a zero residual demand.
      if (supply[i] == 0 && i + 1 < m_) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  void Adjacency(std::vector<std::vector<Eigen::Index>>& adj) const {
    adj.assign(m_ + n_, {});
    for (Eigen::Index i = 0; i < m_; ++i)
      for (Eigen::Index j = 0; j < n_; ++j)
        if (basic_(i, j)) {
          adj[i].push_back(m_ + j);
          adj[m_ + j].push_back(i);
        }
  }

  void ComputePotentials() {
    std::vector<std::vector<Eigen::Index>> adj;
    Adjacency(adj);
    u_.assign(m_, 0.0);
    v_.assign(n_, 0.0);
    std::vector<bool> seen(m_ + n_, false);
    std::queue<Eigen::Index> frontier;
    frontier.push(0);
    seen[0] = true;
    while (!frontier.empty()) {
      const Eigen::Index node = frontier.front();
      frontier.pop();
      for (Eigen::Index next : adj[node]) {
        if (seen[next]) continue;
        seen[next] = true;
        if (node < m_) {
          v_[next - m_] = c_(node, next - m_) - u_[node];
        } else {
          u_[next] = c_(next, node - m_) - v_[node - m_];
        }
        frontier.push(next);
      }
    }
  }

  // Returns true when a nonzero amount of flow moved.
  bool PivotOn(Eigen::Index ei, Eigen::Index ej) {
    std::vector<std::vector<Eigen::Index>> adj;
    Adjacency(adj);
    // Tree path from column node of ej to row node ei.
    const Eigen::Index start = m_ + ej, goal = ei;
    std::vector<Eigen::Index> parent(m_ + n_, -1);
    std::queue<Eigen::Index> frontier;
    frontier.push(start);
    parent[start] = start;
    while (!frontier.empty() && parent[goal] < 0) {
      const Eigen::Index node = frontier.front();
      frontier.pop();
      for (Eigen::Index next : adj[node])
        if (parent[next] < 0) {
          parent[next] = node;
          frontier.push(next);
        }
    }
    Require(parent[goal] >= 0, ErrorKind::kNumerical, "exact OT: basis is not a spanning tree");
    // Walk goal -> start; cells alternate sign starting with '-' adjacent to
    // the entering cell's column.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;
    for (Eigen::Index node = goal; node != start; node = parent[node]) {
      const Eigen::Index a = node, b = parent[node];
      cells.emplace_back(a < m_ ? a : b, (a < m_ ? b : a) - m_);
    }
    // `cells` runs from row ei toward column ej; reorder to start at ej.
    std::reverse(cells.begin(), cells.end());
    std::int64_t theta = std::numeric_limits<std::int64_t>::max();
    std::size_t leave = 0;
    for (std::size_t k = 0; k < cells.size(); k += 2) {
      const auto [i, j] = cells[k];
      const std::int64_t x = flow_(i, j);
      if (x < theta || (x == theta && i * n_ + j < cells[leave].first * n_ + cells[leave].second)) {
        theta = x;
        leave = k;
      }
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const auto [i, j] = cells[k];
      flow_(i, j) += (k % 2 == 0) ? -theta : theta;
    }
    flow_(ei, ej) += theta;
    basic_(ei, ej) = true;
    basic_(cells[leave].first, cells[leave].second) = false;
    return theta > 0;
  }

  const Matrix& c_;
  Eigen::Index m_, n_;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> flow_;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> basic_;
  std::vector<double> u_, v_;
};

}  // namespace

OtResult ExactOt(const CostMatrix& cost) {
  const Eigen::Index m = cost.rows(), n = cost.cols();
  Require(m * n <= kExactOtMaxCells, ErrorKind::kSize,
          "exact OT limited to " + std::to_string(kExactOtMaxCells) + " cells, got " +
              std::to_string(m) + "x" + std::to_string(n));
  // Uniform marginals 1/m and 1/n scaled by m*n become integers n and m.
  TransportationSimplex simplex(cost.entries(), std::vector<std::int64_t>(m, n),
                                std::vector<std::int64_t>(n, m));
  simplex.Solve();
  OtResult result;
  const double total = static_cast<double>(m * n);
  result.plan.coupling = simplex.flow().cast<double>() / total;
  result.plan.row_marginal = Vector::Constant(m, 1.0 / static_cast<double>(m));
  result.plan.col_marginal = Vector::Constant(n, 1.0 / static_cast<double>(n));
  result.marginal_violation = result.plan.MarginalViolation();
  result.transport_cost = cost.entries().cwiseProduct(result.plan.coupling).sum();
  return result;
}

double WassersteinSq(const EmpiricalDistribution& unlabeled,
                     const EmpiricalDistribution& expert, Solver solver, Metric metric,
                     const SinkhornOptions& options) {
  const CostMatrix cost = BuildCostMatrix(unlabeled, expert, metric);
  return solver == Solver::kExact ? ExactOt(cost).transport_cost
                                  : Sinkhorn(cost, options).transport_cost;
}

std::string DumpAlignment(const CostMatrix& cost, const OtResult& result) {
  auto rows_of = [](const Matrix& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(m.cols());
      for (Eigen::Index j = 0; j < m.cols(); ++j) row[j] = m(i, j);
      out.push_back(row);
    }
    return out;
  };
  nlohmann::json j;
  j["cost"] = rows_of(cost.entries());
  j["coupling"] = rows_of(result.plan.coupling);
  j["row_marginal"] = std::vector<double>(result.plan.row_marginal.data(),
                                          result.plan.row_marginal.data() + result.plan.row_marginal.size());
  j["col_marginal"] = std::vector<double>(result.plan.col_marginal.data(),
                                          result.plan.col_marginal.data() + result.plan.col_marginal.size());
  j["transport_cost"] = result.transport_cost;
  j["converged"] = result.converged;
  j["marginal_violation"] = result.marginal_violation;
  j["iterations"] = result.iterations;
  return j.dump(2);
}

}  // namespace otr::ot
