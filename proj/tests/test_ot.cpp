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

#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "otrlab/error.hpp"
#include "otrlab/ot.hpp"

using namespace otr;
using ot::Matrix;
using ot::Vector;

namespace {

Matrix RandomPoints(std::mt19937_64& rng, int n, int d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = normal(rng);
  return m;
}

Matrix RandomCost(std::mt19937_64& rng, int rows, int cols) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix c(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) c(i, j) = u(rng);
  return c;
}

ot::CostMatrix Cost(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix c(rows.size(), rows.begin()->size());
  int i = 0;
  for (auto r : rows) {
    int j = 0;
    for (double x : r) c(i, j++) = x;
    ++i;
  }
  return ot::CostMatrix(c);
}

}  // namespace

TEST_CASE("build_cost_matrix") {
  const ot::EmpiricalDistribution a(Matrix::Zero(1, 2));
  CHECK(ot::BuildCostMatrix(a, a).entries()(0, 0) == 0.0);

  const ot::EmpiricalDistribution b((Matrix(1, 2) << 3.0, 4.0).finished());
  CHECK(ot::BuildCostMatrix(a, b).entries()(0, 0) == 25.0);
  CHECK(ot::BuildCostMatrix(a, b, ot::Metric::kEuclidean).entries()(0, 0) == 5.0);

  std::mt19937_64 rng(1);
  const ot::EmpiricalDistribution x(RandomPoints(rng, 4, 3)), y(RandomPoints(rng, 6, 3));
  for (auto metric : {ot::Metric::kSquaredEuclidean, ot::Metric::kEuclidean, ot::Metric::kCosine}) {
    const Matrix xy = ot::BuildCostMatrix(x, y, metric).entries();
    const Matrix yx = ot::BuildCostMatrix(y, x, metric).entries();
    CHECK((xy - yx.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
  // Direct recomputation.
  const Matrix c = ot::BuildCostMatrix(x, y).entries();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j)
      CHECK(c(i, j) == doctest::Approx((x.support().row(i) - y.support().row(j)).squaredNorm()));

  const ot::EmpiricalDistribution wrong(Matrix::Zero(2, 4));
  CHECK_THROWS_AS(ot::BuildCostMatrix(x, wrong), Error);
  CHECK(ot::ParseMetric("cosine") == ot::Metric::kCosine);
  CHECK_THROWS_AS(ot::ParseMetric("manhattan"), Error);
}

TEST_CASE("standardizer") {
  Matrix s(3, 2);
  s << 1, 5, 2, 5, 3, 5;
  const auto st = ot::Standardizer::Fit(s);
  const Matrix z = st.Apply(s);
  CHECK(z.col(0).mean() == doctest::Approx(0.0));
  CHECK(z.col(0).squaredNorm() / 3.0 == doctest::Approx(1.0));
  CHECK(z.col(1).allFinite());
}

TEST_CASE("sinkhorn examples") {
  SUBCASE("1x1 forced coupling") {
    for (double eps : {1e-3, 0.01, 1.0}) {
      const auto r = ot::Sinkhorn(Cost({{2.5}}), {eps, 1000, 1e-6});
      CHECK(r.plan.coupling(0, 0) == doctest::Approx(1.0));
      CHECK(r.transport_cost == doctest::Approx(2.5));
      CHECK(r.converged);
    }
  }
  SUBCASE("anti-diagonal cost gives the permutation matching") {
    const auto r = ot::Sinkhorn(Cost({{0, 1}, {1, 0}}), {0.01, 1000, 1e-6});
    CHECK(std::abs(r.plan.coupling(0, 0) - 0.5) < 1e-3);
    CHECK(std::abs(r.plan.coupling(1, 1) - 0.5) < 1e-3);
    CHECK(r.plan.coupling(0, 1) < 1e-3);
    CHECK(r.transport_cost < 1e-3);
  }
  SUBCASE("random 5x7 within 5% of the exact optimum, from above") {
    std::mt19937_64 rng(57);
    for (int trial = 0; trial < 20; ++trial) {
      const ot::CostMatrix c(RandomCost(rng, 5, 7));
      const auto exact = ot::ExactOt(c);
      const auto r = ot::Sinkhorn(c, {0.01, 20000, 1e-9});
      CHECK(r.transport_cost >= exact.transport_cost - 1e-6);
      CHECK(r.transport_cost <= exact.transport_cost * 1.05);
      CHECK(r.marginal_violation < 1e-6);
    }
  }
  SUBCASE("reports non-convergence instead of failing") {
    std::mt19937_64 rng(3);
    const ot::CostMatrix c(RandomCost(rng, 6, 6) * 50.0);
    const auto r = ot::Sinkhorn(c, {1e-3, 2, 1e-12});
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 2);
    CHECK(r.marginal_violation > 0.0);
  }
  SUBCASE("tiny epsilon on widely spread costs stays finite") {
    std::mt19937_64 rng(8);
    const ot::CostMatrix c(RandomCost(rng, 30, 20) * 1e4);
    const auto r = ot::Sinkhorn(c, {1e-3, 1000, 1e-6});
    CHECK(r.plan.coupling.allFinite());
    CHECK(r.transport_cost >= ot::ExactOt(c).transport_cost - 1e-6);
  }
  CHECK_THROWS_AS(ot::Sinkhorn(Cost({{1.0}}), {0.0, 10, 1e-6}), Error);
}

TEST_CASE("exact_ot examples") {
  SUBCASE("zero diagonal") {
    std::mt19937_64 rng(2);
    Matrix c = RandomCost(rng, 5, 5) + Matrix::Constant(5, 5, 0.1);
    c.diagonal().setZero();
    const auto r = ot::ExactOt(ot::CostMatrix(c));
    CHECK(r.transport_cost == 0.0);
    CHECK((r.plan.coupling - Matrix::Identity(5, 5) / 5.0).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("2x2 hand instance") {
    // Both vertices of the uniform 2x2 polytope cost (1+4)/2 = (2+3)/2 = 2.5.
    const auto c = Cost({{1, 2}, {3, 4}});
    const auto r = ot::ExactOt(c);
    const auto oracle_opt = oracle::EnumerateVertices(c.entries());
    CHECK(r.transport_cost == doctest::Approx(2.5));
    CHECK(oracle_opt.cost == doctest::Approx(2.5));
    CHECK(r.marginal_violation < 1e-12);
  }
  SUBCASE("random integer costs match vertex enumeration") {
    std::mt19937_64 rng(33);
    std::uniform_int_distribution<int> d(0, 9);
    for (int trial = 0; trial < 200; ++trial) {
      const int m = 1 + trial % 4, n = 1 + (trial / 4) % 4;
      Matrix c(m, n);
      for (auto& x : c.reshaped()) x = d(rng);
      const auto r = ot::ExactOt(ot::CostMatrix(c));
      CHECK(r.transport_cost == doctest::Approx(oracle::EnumerateVertices(c).cost).epsilon(1e-12));
      CHECK(r.marginal_violation < 1e-12);
      CHECK((r.plan.coupling.array() >= 0.0).all());
    }
  }
  SUBCASE("too large") {
    CHECK_THROWS_AS(ot::ExactOt(ot::CostMatrix(Matrix::Ones(101, 100))), Error);
    try {
      ot::ExactOt(ot::CostMatrix(Matrix::Ones(101, 100)));
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kSize);
    }
  }
  SUBCASE("exact handles larger degenerate instances") {
    std::mt19937_64 rng(12);
    const ot::EmpiricalDistribution x(RandomPoints(rng, 60, 2)), y(RandomPoints(rng, 60, 2));
    const auto c = ot::BuildCostMatrix(x, y);
    const auto exact = ot::ExactOt(c);
    const auto approx = ot::Sinkhorn(c, {0.005, 50000, 1e-9});
    CHECK(exact.transport_cost <= approx.transport_cost + 1e-6);
    CHECK(exact.marginal_violation < 1e-12);
  }
}

TEST_CASE("wasserstein_sq") {
  std::mt19937_64 rng(6);
  const ot::EmpiricalDistribution x(RandomPoints(rng, 7, 3));
  CHECK(ot::WassersteinSq(x, x, ot::Solver::kExact) == 0.0);
  const ot::EmpiricalDistribution a((Matrix(1, 2) << 1.0, 2.0).finished());
  const ot::EmpiricalDistribution b((Matrix(1, 2) << -1.0, 0.0).finished());
  CHECK(ot::WassersteinSq(a, b, ot::Solver::kExact) == 8.0);
  CHECK(ot::WassersteinSq(a, b, ot::Solver::kSinkhorn) == doctest::Approx(8.0));
  for (int trial = 0; trial < 50; ++trial) {
    const ot::EmpiricalDistribution p(RandomPoints(rng, 3 + trial % 5, 2));
    const ot::EmpiricalDistribution q(RandomPoints(rng, 2 + trial % 6, 2));
    const double exact = ot::WassersteinSq(p, q, ot::Solver::kExact);
    const double approx = ot::WassersteinSq(p, q, ot::Solver::kSinkhorn,
                                            ot::Metric::kSquaredEuclidean, {0.01, 5000, 1e-9});
    CHECK(approx >= exact - 1e-6);
  }
}

TEST_CASE("ot properties") {
  std::mt19937_64 rng(77);
  SUBCASE("entropic monotonicity and convergence on standardized 6x6") {
    for (int trial = 0; trial < 30; ++trial) {
      const Matrix pts_x = RandomPoints(rng, 6, 2), pts_y = RandomPoints(rng, 6, 2);
      Matrix both(12, 2);
      both << pts_x, pts_y;
      const auto st = ot::Standardizer::Fit(both);
      const auto c = ot::BuildCostMatrix(ot::EmpiricalDistribution(st.Apply(pts_x)),
                                         ot::EmpiricalDistribution(st.Apply(pts_y)));
      const double exact = ot::ExactOt(c).transport_cost;
      double prev = std::numeric_limits<double>::infinity();
      for (double eps : {1.0, 0.1, 0.01}) {
        const auto r = ot::Sinkhorn(c, {eps, 100000, 1e-10});
        CHECK(r.transport_cost <= prev + 1e-9);
        CHECK(r.transport_cost >= exact - 1e-6);
        CHECK(r.transport_cost <= exact + eps * std::log(36.0) + 1e-6);
        CHECK(r.marginal_violation < 1e-6);
        prev = r.transport_cost;
      }
      const auto fine = ot::Sinkhorn(c, {0.005, 100000, 1e-10});
      CHECK(fine.transport_cost <= exact * 1.02 + 1e-12);
    }
  }
  SUBCASE("permuting expert support permutes plan columns") {
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix x = RandomPoints(rng, 5, 2), y = RandomPoints(rng, 6, 2);
      std::vector<int> perm = {3, 0, 5, 1, 4, 2};
      Matrix yp(6, 2);
      for (int j = 0; j < 6; ++j) yp.row(j) = y.row(perm[j]);
      const auto c = ot::BuildCostMatrix(ot::EmpiricalDistribution(x), ot::EmpiricalDistribution(y));
      const auto cp = ot::BuildCostMatrix(ot::EmpiricalDistribution(x), ot::EmpiricalDistribution(yp));
      CHECK(ot::ExactOt(c).transport_cost == doctest::Approx(ot::ExactOt(cp).transport_cost).epsilon(1e-12));
      const auto s = ot::Sinkhorn(c, {0.05, 10000, 1e-10});
      const auto sp = ot::Sinkhorn(cp, {0.05, 10000, 1e-10});
      CHECK(s.transport_cost == doctest::Approx(sp.transport_cost).epsilon(1e-8));
      for (int j = 0; j < 6; ++j)
        CHECK((s.plan.coupling.col(perm[j]) - sp.plan.coupling.col(j)).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
  SUBCASE("dump is parseable JSON") {
    const auto c = Cost({{0, 1}, {1, 0}});
    const auto text = ot::DumpAlignment(c, ot::ExactOt(c));
    CHECK(text.find("\"coupling\"") != std::string::npos);
  }
}
