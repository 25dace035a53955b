// Copyright 2026 The ReCon Toolkit Authors
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
#include "recon/lp_oracle.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "test_util.hpp"

namespace recon {
namespace {

void expect_feasible(const Matrix& plan, const Marginals& m) {
  for (std::size_t u = 0; u < plan.rows(); ++u) {
    double s = 0;
    for (double v : plan.row(u)) {
      EXPECT_GE(v, -1e-12);
      s += v;
    }
    EXPECT_NEAR(s, m.user[u], 1e-9);
  }
  for (std::size_t i = 0; i < plan.cols(); ++i) {
    double s = 0;
    for (std::size_t u = 0; u < plan.rows(); ++u) s += plan(u, i);
    EXPECT_NEAR(s, m.item[i], 1e-9);
  }
}

TEST(LpOracle, IdentityAssignment) {
  Matrix d(3, 3, 1.0);
  for (std::size_t k = 0; k < 3; ++k) d(k, k) = 0.0;
  const LpSolution s = lp_oracle(d, Marginals::uniform(3, 3));
  EXPECT_NEAR(s.objective, 0.0, 1e-12);
  for (std::size_t u = 0; u < 3; ++u) {
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s.plan(u, i), u == i ? 1.0 / 3 : 0.0, 1e-12);
  }
}

TEST(LpOracle, AntiDiagonal) {
  Matrix d(2, 2);
  d(0, 0) = 5;
  d(0, 1) = 1;
  d(1, 0) = 2;
  d(1, 1) = 7;
  const LpSolution s = lp_oracle(d, Marginals::uniform(2, 2));
  EXPECT_NEAR(s.objective, 1.5, 1e-12);
  EXPECT_NEAR(s.plan(0, 1), 0.5, 1e-12);
  EXPECT_NEAR(s.plan(1, 0), 0.5, 1e-12);
}

TEST(LpOracle, NonUniformMarginals) {
  // One user holding 70% of mass, items with 0.4/0.6.
  Matrix d(2, 2);
  d(0, 0) = 0;
  d(0, 1) = 1;
  d(1, 0) = 1;
  d(1, 1) = 0;
  Marginals m{{0.7, 0.3}, {0.4, 0.6}};
  const LpSolution s = lp_oracle(d, m);
  expect_feasible(s.plan, m);
  EXPECT_NEAR(s.objective, 0.3, 1e-12);
}

TEST(LpOracle, NotBeatenByRandomFeasiblePlans) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> dist(0, 9);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix d(4, 5);
    for (double& v : d.values()) v = dist(rng);
    const Marginals m = Marginals::uniform(4, 5);
    const LpSolution s = lp_oracle(d, m);
    expect_feasible(s.plan, m);
    std::vector<std::vector<double>> dn(4);
    for (std::size_t u = 0; u < 4; ++u) dn[u].assign(d.row(u).begin(), d.row(u).end());
    for (int k = 0; k < 200; ++k) {
      const auto plan = oracle::random_feasible_plan(m.user, m.item, rng);
      EXPECT_LE(s.objective, oracle::linear_cost(plan, dn) + 1e-12);
    }
  }
}

TEST(LpOracle, MatchesExhaustiveAssignment) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(-2.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 5;
    Matrix d(n, n);
    for (double& v : d.values()) v = unit(rng);
    std::vector<std::vector<double>> dn(n);
    for (std::size_t u = 0; u < n; ++u) dn[u].assign(d.row(u).begin(), d.row(u).end());
    EXPECT_NEAR(lp_oracle(d, Marginals::uniform(n, n)).objective,
                oracle::assignment_optimum(dn), 1e-10);
  }
}

TEST(LpOracle, Errors) {
  EXPECT_THAT_THROWS(lp_oracle(Matrix(21, 20), Marginals::uniform(21, 20)), "size limit");
  EXPECT_THROW(lp_oracle(Matrix(2, 2), Marginals::uniform(2, 3)), Error);
}

}  // namespace
}  // namespace recon
