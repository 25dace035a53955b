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
#include "recon/recon.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"

namespace recon {
namespace {

SplitDataset small_split(std::uint64_t seed = 4) {
  SyntheticSpec spec;
  spec.num_users = 30;
  spec.num_items = 40;
  spec.interactions_per_user = 6;
  spec.seed = seed;
  return temporal_split(generate_synthetic(spec));
}

ReconConfig fast_config() {
  ReconConfig cfg;
  cfg.epochs = 4;
  cfg.embedding_dim = 4;
  cfg.batch_size = 32;
  return cfg;
}

std::vector<double> flatten(const ModelParams& p) {
  std::vector<double> v;
  v.insert(v.end(), p.user_embeddings.begin(), p.user_embeddings.end());
  v.insert(v.end(), p.item_embeddings.begin(), p.item_embeddings.end());
  v.insert(v.end(), p.user_bias.begin(), p.user_bias.end());
  v.insert(v.end(), p.item_bias.begin(), p.item_bias.end());
  v.push_back(p.global_bias);
  return v;
}

ModelParams unflatten(const ModelParams& shape, const std::vector<double>& v) {
  ModelParams p = ModelParams::zeros_like(shape);
  std::size_t k = 0;
  for (auto* dst : {&p.user_embeddings, &p.item_embeddings, &p.user_bias, &p.item_bias}) {
    for (double& x : *dst) x = v[k++];
  }
  p.global_bias = v[k];
  return p;
}

TEST(ScoreGradToParams, LinearFunctionalMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  const ModelParams p = init_params(3, 4, 2, 5, 0.8);
  const Matrix w = random_scores(3, 4, rng, -2.0, 2.0);
  auto f = [&](const std::vector<double>& x) {
    const Matrix s = score_matrix(unflatten(p, x));
    double total = 0;
    for (std::size_t k = 0; k < s.size(); ++k) total += w.values()[k] * s.values()[k];
    return total;
  };
  const auto analytic = flatten(score_grad_to_params(p, w));
  const auto x0 = flatten(p);
  for (std::size_t k = 0; k < x0.size(); ++k) {
    const double numeric = oracle::central_difference(f, x0, k, 1e-6);
    EXPECT_NEAR(numeric, analytic[k], 1e-8) << "coord " << k;
  }
}

TEST(ScoreGradToParams, ClampedEntriesContributeNothing) {
  ModelParams p = ModelParams::zeros(2, 2, 1);
  p.global_bias = 40.0;
  const ModelParams g = score_grad_to_params(p, Matrix(2, 2, 1.0));
  EXPECT_EQ(g, ModelParams::zeros_like(p));
}

TEST(CongestionChain, MatchesFiniteDifferencesThroughParameters) {
  const double eps = 1.0;
  const SinkhornOptions opts{eps, 100000, 1e-12};
  const ModelParams p = init_params(3, 3, 2, 19, 0.9);
  const Marginals m = Marginals::uniform(3, 3);
  auto objective = [&](const std::vector<double>& x) {
    const Matrix s = score_matrix(unflatten(p, x));
    return congestion_objective(s, sinkhorn(build_recon_cost(s), m, opts).values, eps);
  };
  const Matrix s = score_matrix(p);
  const TransportPlan plan = sinkhorn(build_recon_cost(s), m, opts);
  const auto analytic = flatten(score_grad_to_params(p, congestion_grad(s, plan.values)));
  const auto x0 = flatten(p);
  for (std::size_t k = 0; k < x0.size(); ++k) {
    const double numeric = oracle::central_difference(objective, x0, k, 1e-5);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[k]), 1e-6});
    EXPECT_LT(std::abs(numeric - analytic[k]) / scale, 1e-5) << "coord " << k;
  }
}

TEST(Train, ZeroLambdaEqualsBaseTrainingBitForBit) {
  const SplitDataset data = small_split();
  ReconConfig cfg = fast_config();
  cfg.lambda = 0.0;
  const TrainResult a = train(cfg, data);
  const TrainResult b = train_base(cfg, data);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.history.epochs.size(), b.history.epochs.size());
  for (std::size_t e = 0; e < a.history.epochs.size(); ++e) {
    EXPECT_EQ(a.history.epochs[e].base_loss, b.history.epochs[e].base_loss);
  }
}

TEST(Train, DeterministicPerSeed) {
  const SplitDataset data = small_split();
  ReconConfig cfg = fast_config();
  cfg.lambda = 1e-2;
  EXPECT_EQ(train(cfg, data).params, train(cfg, data).params);
  ReconConfig other = cfg;
  other.seed = 2;
  EXPECT_NE(train(cfg, data).params, train(other, data).params);
}

TEST(Train, PositiveLambdaChangesParameters) {
  const SplitDataset data = small_split();
  ReconConfig cfg = fast_config();
  const ModelParams base = train_base(cfg, data).params;
  cfg.lambda = 1e-2;
  const TrainResult r = train(cfg, data);
  EXPECT_NE(r.params, base);
  EXPECT_TRUE(r.params.all_finite());
}

TEST(Train, HistoryRecordsEveryEpoch) {
  const SplitDataset data = small_split();
  ReconConfig cfg = fast_config();
  cfg.lambda = 0.1;
  cfg.ot_refresh_every = 2;
  const TrainResult r = train(cfg, data);
  ASSERT_EQ(r.history.epochs.size(), 4u);
  EXPECT_EQ(r.history.selected_epoch, 4);
  for (const EpochRecord& e : r.history.epochs) {
    EXPECT_TRUE(std::isfinite(e.base_loss));
    EXPECT_GT(e.base_loss, 0.0);
    if (e.epoch % 2 == 0) {
      EXPECT_TRUE(std::isfinite(e.ot_value));
      EXPECT_NEAR(e.combined, e.base_loss + 0.1 * e.congestion_objective, 1e-9);
      EXPECT_GE(e.row_residual, 0.0);
    } else {
      EXPECT_TRUE(std::isnan(e.ot_value));
      EXPECT_EQ(e.combined, e.base_loss);
    }
  }
  const TrainResult base = train_base(cfg, data);
  for (const EpochRecord& e : base.history.epochs) EXPECT_TRUE(std::isnan(e.ot_value));
}

TEST(Train, BaseLossDecreasesOverEpochs) {
  const SplitDataset data = small_split();
  ReconConfig cfg = fast_config();
  cfg.epochs = 15;
  const TrainResult r = train_base(cfg, data);
  EXPECT_LT(r.history.epochs.back().base_loss, r.history.epochs.front().base_loss);
}

TEST(Train, EarlyStoppingSelectsAnEpoch) {
  const SplitDataset data = small_split();
  ReconConfig cfg = fast_config();
  cfg.epochs = 10;
  cfg.patience = 2;
  const TrainResult r = train_base(cfg, data);
  EXPECT_GE(r.history.selected_epoch, 1);
  EXPECT_LE(r.history.selected_epoch, static_cast<int>(r.history.epochs.size()));
  for (const EpochRecord& e : r.history.epochs) EXPECT_FALSE(std::isnan(e.validation_ndcg));
}

TEST(Train, DegenerateOneByOne) {
  const SplitDataset data = temporal_split(make_log({{"u", "i", 0}}));
  ReconConfig cfg = fast_config();
  cfg.lambda = 1.0;
  const TrainResult r = train(cfg, data);
  EXPECT_TRUE(r.params.all_finite());
  const Matrix s = score_matrix(r.params);
  const TransportPlan plan = sinkhorn(build_recon_cost(s), Marginals::uniform(1, 1), {10.0, 10});
  EXPECT_NEAR(plan.values(0, 0), 1.0, 1e-15);
}

TEST(Train, RejectsEmptyTrainAndBadConfig) {
  SplitDataset empty;
  EXPECT_THROW(train(fast_config(), empty), Error);
  ReconConfig bad = fast_config();
  bad.learning_rate = 0;
  EXPECT_THROW(train(bad, small_split()), Error);
}

TEST(Train, HistoryCsvHasHeaderAndOneRowPerEpoch) {
  TempDir dir;
  ReconConfig cfg = fast_config();
  cfg.lambda = 1e-3;
  const TrainResult r = train(cfg, small_split());
  save_history_csv(r.history, dir.file("h.csv"));
  std::ifstream in(dir.file("h.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kHistoryCsvHeader);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
}

TEST(ReconConfigTest, KeyValueRoundTrip) {
  ReconConfig cfg;
  cfg.lambda = 1e-4;
  cfg.epsilon = 0.5;
  cfg.seed = 77;
  cfg.patience = 3;
  std::istringstream text(cfg.to_kv().to_string());
  const ReconConfig back = ReconConfig::from_kv(KeyValueConfig::parse(text, "mem"));
  EXPECT_EQ(back.to_kv().to_string(), cfg.to_kv().to_string());
  EXPECT_EQ(back.hash(), cfg.hash());
  ReconConfig other = cfg;
  other.lambda = 1e-3;
  EXPECT_NE(other.hash(), cfg.hash());
}

TEST(ReconConfigTest, RejectsInvalidValues) {
  std::istringstream text("lambda = -1\n");
  EXPECT_THAT_THROWS(ReconConfig::from_kv(KeyValueConfig::parse(text, "mem")), "lambda");
}

TEST(RecommendTopK, Examples) {
  Matrix s(1, 3);
  s(0, 0) = 0.9;
  s(0, 1) = 0.1;
  s(0, 2) = 0.5;
  EXPECT_EQ(recommend_topk(s, 2).lists[0], (std::vector<int>{0, 2}));
  const Matrix tie(1, 2, 0.5);
  EXPECT_EQ(recommend_topk(tie, 1).lists[0], (std::vector<int>{0}));
  EXPECT_THROW(recommend_topk(s, 0), Error);
}

TEST(RecommendTopK, ExcludesTrainItemsAndShortensLists) {
  const InteractionLog log = make_log({{"u", "a", 0}, {"u", "b", 0}, {"v", "c", 0}});
  const UserItemSets sets = UserItemSets::from_log(log);
  Matrix s(2, 3, 0.0);
  s(0, 0) = 0.9;
  s(0, 1) = 0.8;
  s(0, 2) = 0.1;
  const RecommendationLists r = recommend_topk(s, 2, &sets);
  EXPECT_EQ(r.lists[0], (std::vector<int>{2}));
  EXPECT_EQ(r.lists[1], (std::vector<int>{0, 1}));
  EXPECT_TRUE(r.train_excluded);
  ASSERT_EQ(r.warnings.size(), 1u);
}

TEST(RecommendTopK, MatchesFullSortOracle) {
  std::mt19937_64 rng(66);
  std::uniform_int_distribution<int> coarse(0, 5);  // frequent ties
  for (int trial = 0; trial < 20; ++trial) {
    Matrix s(5, 12);
    for (double& v : s.values()) v = coarse(rng) / 5.0;
    for (int k : {1, 3, 12, 20}) {
      const RecommendationLists r = recommend_topk(s, k);
      for (std::size_t u = 0; u < 5; ++u) {
        std::vector<int> order(12);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return s(u, a) > s(u, b); });
        order.resize(std::min(k, 12));
        EXPECT_EQ(r.lists[u], order);
      }
    }
  }
}

TEST(Recommendations, CsvRoundTrip) {
  TempDir dir;
  const InteractionLog log = make_log({{"u", "a", 0}, {"v", "b", 0}, {"w", "c", 0}});
  std::mt19937_64 rng(1);
  const RecommendationLists r = recommend_topk(random_scores(3, 3, rng), 2);
  save_recommendations(r, *log.users, *log.items, dir.file("r.csv"));
  const RecommendationLists back = load_recommendations(dir.file("r.csv"), *log.users, *log.items);
  EXPECT_EQ(back.lists, r.lists);
  EXPECT_EQ(back.k, 2);
}

}  // namespace
}  // namespace recon
