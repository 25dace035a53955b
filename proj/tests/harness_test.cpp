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
#include "recon/harness.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"

namespace recon {
namespace {

ExperimentGrid tiny_grid() {
  ExperimentGrid g;
  g.dataset.synthetic.num_users = 25;
  g.dataset.synthetic.num_items = 30;
  g.dataset.synthetic.interactions_per_user = 6;
  g.train.epochs = 3;
  g.train.embedding_dim = 4;
  g.train.batch_size = 64;
  g.ks = {1, 5};
  g.seeds = {1};
  return g;
}

bool same_metrics(const MetricReport& a, const MetricReport& b) {
  auto eq = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  return a.k == b.k && a.seed == b.seed && eq(a.ndcg, b.ndcg) && eq(a.recall, b.recall) &&
         eq(a.hit_rate, b.hit_rate) && a.congestion == b.congestion &&
         a.coverage == b.coverage && a.gini == b.gini;
}

TEST(MethodSpecTest, NamesAndConfigIds) {
  EXPECT_EQ(MethodSpec::base().name(), "base");
  EXPECT_EQ(MethodSpec::recon(0.01).config_id(), "lambda=0.01");
  EXPECT_EQ(MethodSpec::carot_with(1.0, CarotTransform::kIdPlus).config_id(),
            "epsilon=1;transform=IdPlus");
  EXPECT_EQ(MethodSpec::fairrec(0.2).config_id(), "alpha=0.2");
  EXPECT_TRUE(MethodSpec::carot_with(1.0, CarotTransform::kRank).needs_base_scores());
  EXPECT_FALSE(MethodSpec::recon(0.1).needs_base_scores());
}

TEST(ExperimentGridTest, StandardGridShape) {
  const ExperimentGrid g = ExperimentGrid::standard();
  EXPECT_EQ(g.methods.size(), 1u + 6u + 12u + 5u);
  EXPECT_EQ(g.ks, (std::vector<int>{1, 10, 100}));
}

TEST(ExperimentGridTest, FromKeyValues) {
  std::istringstream text(
      "methods = base, fairrec\nfairrec_alphas = 0.5\nks = 2,4\nseeds = 3,4\n"
      "synth.users = 10\nepochs = 2\n");
  const ExperimentGrid g = ExperimentGrid::from_kv(KeyValueConfig::parse(text, "mem"));
  ASSERT_EQ(g.methods.size(), 2u);
  EXPECT_EQ(g.methods[1].config_id(), "alpha=0.5");
  EXPECT_EQ(g.ks, (std::vector<int>{2, 4}));
  EXPECT_EQ(g.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(g.dataset.synthetic.num_users, 10);
  EXPECT_EQ(g.train.epochs, 2);
  std::istringstream bad("methods = base,magic\n");
  EXPECT_THAT_THROWS(ExperimentGrid::from_kv(KeyValueConfig::parse(bad, "mem")), "magic");
}

TEST(ScheduledKs, FairRecSkipsOne) {
  EXPECT_EQ(scheduled_ks(MethodSpec::fairrec(1.0), {1, 10, 100}), (std::vector<int>{10, 100}));
  EXPECT_EQ(scheduled_ks(MethodSpec::base(), {1, 10}), (std::vector<int>{1, 10}));
}

TEST(ParallelFor, RunsEveryIndexOnceAndCapturesErrors) {
  std::vector<std::atomic<int>> hits(50);
  const auto errs = parallel_for(50, 4, [&](std::size_t i) {
    ++hits[i];
    if (i == 7) throw Error("boom");
  });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(errs[i].has_value(), i == 7);
  EXPECT_NE(errs[7]->find("boom"), std::string::npos);
  EXPECT_TRUE(parallel_for(0, 3, [](std::size_t) {}).empty());
}

TEST(Sweep, TwoMethodsTwoKsOneSeedGivesFourRows) {
  ExperimentGrid g = tiny_grid();
  g.methods = {MethodSpec::base(), MethodSpec::recon(0.01)};
  SweepResult r = sweep(g, 1);
  EXPECT_TRUE(r.failures.empty());
  EXPECT_EQ(r.rows.size(), 4u);
}

TEST(Sweep, FairRecIsNeverRunAtKOne) {
  ExperimentGrid g = tiny_grid();
  g.methods = {MethodSpec::fairrec(0.5)};
  g.ks = {1};
  EXPECT_TRUE(sweep(g, 1).rows.empty());
  g.ks = {1, 5};
  const SweepResult r = sweep(g, 1);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].k, 5);
}

TEST(Sweep, RejectsEmptyGrid) {
  ExperimentGrid g = tiny_grid();
  EXPECT_THAT_THROWS(sweep(g, 1), "empty");
}

TEST(Sweep, ParallelismDoesNotChangeResults) {
  ExperimentGrid g = tiny_grid();
  g.methods = {MethodSpec::base(), MethodSpec::recon(0.1),
               MethodSpec::carot_with(10.0, CarotTransform::kNdcgLike),
               MethodSpec::fairrec(0.6)};
  g.seeds = {1, 2};
  SweepResult serial = sweep(g, 1);
  SweepResult parallel = sweep(g, 3);
  sort_rows(serial.rows);
  sort_rows(parallel.rows);
  ASSERT_EQ(serial.rows.size(), parallel.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    EXPECT_EQ(to_csv_row(serial.rows[i]), to_csv_row(parallel.rows[i]));
  }
}

TEST(Sweep, ZeroLambdaReconRowMatchesBaseRow) {
  ExperimentGrid g = tiny_grid();
  g.methods = {MethodSpec::base(), MethodSpec::recon(0.0)};
  SweepResult r = sweep(g, 1);
  sort_rows(r.rows);
  ASSERT_EQ(r.rows.size(), 4u);
  // Sorted: base k=1, base k=5, recon k=1, recon k=5.
  EXPECT_TRUE(same_metrics(r.rows[0], r.rows[2]));
  EXPECT_TRUE(same_metrics(r.rows[1], r.rows[3]));
}

TEST(Sweep, ReportsFailuresWithoutAborting) {
  ExperimentGrid g = tiny_grid();
  g.methods = {MethodSpec::base(), MethodSpec::fairrec(1.0)};
  g.ks = {5};
  g.dataset.synthetic.num_users = 3;  // |I| > k * |U| is rejected by FairRec
  const SweepResult r = sweep(g, 2);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].method, "fairrec");
  EXPECT_NE(r.failures[0].error.find("k too small"), std::string::npos);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].method, "base");
}

TEST(NonDominated, Examples) {
  EXPECT_EQ(non_dominated({{1, 1}, {2, 2}}), (std::vector<bool>{false, true}));
  EXPECT_EQ(non_dominated({{1, 2}, {2, 1}}), (std::vector<bool>{true, true}));
  EXPECT_EQ(non_dominated({{1, 1}, {1, 1}}), (std::vector<bool>{true, true}));
  EXPECT_EQ(non_dominated({{1, 1}, {1, 2}}), (std::vector<bool>{false, true}));
  EXPECT_EQ(non_dominated({}), std::vector<bool>{});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(non_dominated({{nan, 5}, {0, 0}}), (std::vector<bool>{false, true}));
}

TEST(NonDominated, MatchesPairwiseOracle) {
  std::mt19937_64 rng(314);
  std::uniform_int_distribution<int> coarse(0, 6);  // many ties
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<double, double>> pts(1 + trial % 40);
    for (auto& p : pts) p = {coarse(rng), coarse(rng)};
    EXPECT_EQ(non_dominated(pts), oracle::pareto_pairwise(pts)) << "trial " << trial;
  }
}

TEST(ParetoFront, WithinMethodAndGlobal) {
  std::vector<ParetoPoint> pts(3);
  pts[0] = {1.0, 1.0, "a", "x", 10};
  pts[1] = {2.0, 2.0, "b", "y", 10};
  pts[2] = {0.5, 0.5, "a", "z", 10};
  pareto_front(pts);
  EXPECT_FALSE(pts[0].pareto_global);
  EXPECT_TRUE(pts[0].pareto_within_method);
  EXPECT_TRUE(pts[1].pareto_global);
  EXPECT_FALSE(pts[2].pareto_within_method);
}

TEST(AverageOverSeeds, MeansPerConfigAndK) {
  MetricReport a, b;
  a.method = b.method = "base";
  a.config = b.config = "base";
  a.k = b.k = 10;
  a.seed = 1;
  b.seed = 2;
  a.ndcg = 0.2;
  b.ndcg = 0.4;
  a.coverage = 0.5;
  b.coverage = 0.7;
  const auto avg = average_over_seeds({a, b});
  ASSERT_EQ(avg.size(), 1u);
  EXPECT_NEAR(avg[0].ndcg, 0.3, 1e-15);
  EXPECT_NEAR(avg[0].coverage, 0.6, 1e-15);
}

TEST(EmitReport, WritesAllFilesWithHeaders) {
  TempDir dir;
  ExperimentGrid g = tiny_grid();
  g.methods = {MethodSpec::base(), MethodSpec::recon(0.1), MethodSpec::fairrec(1.0)};
  const SweepResult r = sweep(g, 1);
  const auto files = emit_report(r.rows, dir.file("out"));
  EXPECT_EQ(files.size(), 11u);
  for (const auto& f : files) EXPECT_TRUE(std::filesystem::exists(f)) << f;

  auto first_line = [](const std::string& path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    return line;
  };
  EXPECT_EQ(first_line(dir.file("out/results.csv")), kMetricCsvHeader);
  EXPECT_EQ(first_line(dir.file("out/pareto.csv")), kParetoCsvHeader);
  EXPECT_EQ(first_line(dir.file("out/scatter_ndcg_vs_coverage.csv")), kScatterCsvHeader);
  EXPECT_TRUE(std::filesystem::exists(dir.file("out/scatter_hit_rate_vs_neg_gini.csv")) ||
              std::filesystem::exists(dir.file("out/scatter_hit_rate_vs_gini.csv")));

  const auto back = read_results_csv(dir.file("out/results.csv"));
  ASSERT_EQ(back.size(), r.rows.size());
  auto sorted = r.rows;
  sort_rows(sorted);
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(to_csv_row(back[i]), to_csv_row(sorted[i]));
  }
}

TEST(ResolveOutputPath, UsesEnvironmentRoot) {
  ::setenv(kOutputRootEnv, "/tmp/recon_root", 1);
  EXPECT_EQ(resolve_output_path("runs/a"), "/tmp/recon_root/runs/a");
  EXPECT_EQ(resolve_output_path("/abs/b"), "/abs/b");
  ::unsetenv(kOutputRootEnv);
  EXPECT_EQ(resolve_output_path("runs/a"), "runs/a");
}

}  // namespace
}  // namespace recon
