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
#include "recon/baselines.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "recon/metrics.hpp"
#include "test_util.hpp"

namespace recon {
namespace {

std::vector<int> exposures(const RecommendationLists& r, std::size_t n_items) {
  std::vector<int> e(n_items, 0);
  for (const auto& l : r.lists) {
    for (int i : l) ++e[i];
  }
  return e;
}

TEST(CarotTransformTest, NamesRoundTrip) {
  for (auto t : {CarotTransform::kIdPlus, CarotTransform::kExpPlus, CarotTransform::kRank,
                 CarotTransform::kNdcgLike}) {
    EXPECT_EQ(parse_carot_transform(to_string(t)), t);
  }
  EXPECT_THROW(parse_carot_transform("Linear"), Error);
}

TEST(CarotTransformTest, Values) {
  Matrix s(1, 3);
  s(0, 0) = 0.2;
  s(0, 1) = 0.9;
  s(0, 2) = 0.5;
  const Matrix id = carot_transform(s, CarotTransform::kIdPlus);
  EXPECT_NEAR(id(0, 0), 0.8, 1e-15);
  EXPECT_NEAR(id(0, 1), 0.1, 1e-15);
  const Matrix ex = carot_transform(s, CarotTransform::kExpPlus);
  EXPECT_NEAR(ex(0, 2), std::exp(-0.5), 1e-15);
  const Matrix rk = carot_transform(s, CarotTransform::kRank);
  EXPECT_NEAR(rk(0, 1), 1.0 / 3, 1e-15);
  EXPECT_NEAR(rk(0, 2), 2.0 / 3, 1e-15);
  EXPECT_NEAR(rk(0, 0), 1.0, 1e-15);
  const Matrix nd = carot_transform(s, CarotTransform::kNdcgLike);
  EXPECT_NEAR(nd(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(nd(0, 2), 1.0 - 1.0 / std::log2(3.0), 1e-15);
}

TEST(CarotTransformTest, DecreasingInScore) {
  std::mt19937_64 rng(2);
  const Matrix s = random_scores(4, 9, rng);
  for (auto t : {CarotTransform::kIdPlus, CarotTransform::kExpPlus, CarotTransform::kRank,
                 CarotTransform::kNdcgLike}) {
    const Matrix d = carot_transform(s, t);
    for (std::size_t u = 0; u < 4; ++u) {
      for (std::size_t a = 0; a < 9; ++a) {
        for (std::size_t b = 0; b < 9; ++b) {
          if (s(u, a) > s(u, b)) {
            EXPECT_LT(d(u, a), d(u, b)) << to_string(t);
          }
        }
      }
    }
  }
}

TEST(Carot, TwoByTwoSplitsTheItems) {
  Matrix s(2, 2);
  s(0, 0) = 0.9;
  s(0, 1) = 0.1;
  s(1, 0) = 0.8;
  s(1, 1) = 0.2;
  // Plain top-1 sends both users to item 0.
  EXPECT_EQ(recommend_topk(s, 1).lists, (std::vector<std::vector<int>>{{0}, {0}}));
  const RecommendationLists r = carot(s, {1.0, CarotTransform::kIdPlus, 1000, 1e-12}, 1);
  EXPECT_EQ(r.lists, (std::vector<std::vector<int>>{{0}, {1}}));
}

TEST(Carot, SteersTheContestedItem) {
  Matrix s(2, 2);
  s(0, 0) = 0.9;
  s(0, 1) = 0.8;
  s(1, 0) = 0.9;
  s(1, 1) = 0.1;
  EXPECT_EQ(coverage(recommend_topk(s, 1), 2), 0.5);
  const RecommendationLists r = carot(s, {0.05, CarotTransform::kIdPlus, 100000, 1e-12}, 1);
  EXPECT_EQ(r.lists, (std::vector<std::vector<int>>{{1}, {0}}));
  EXPECT_EQ(coverage(r, 2), 1.0);
}

TEST(Carot, EqualScoresFallBackToTieRule) {
  const RecommendationLists r = carot(Matrix(3, 4, 0.5), {}, 2);
  for (const auto& l : r.lists) EXPECT_EQ(l, (std::vector<int>{0, 1}));
}

TEST(Carot, RankTransformsIgnoreScoreMagnitudes) {
  std::mt19937_64 rng(10);
  const Matrix s = random_scores(8, 12, rng);
  Matrix squashed = s;
  for (double& v : squashed.values()) v = v * v * v;  // strictly monotone
  for (auto t : {CarotTransform::kRank, CarotTransform::kNdcgLike}) {
    const CarotConfig cfg{10.0, t, 1000, 1e-12};
    EXPECT_EQ(carot(s, cfg, 3).lists, carot(squashed, cfg, 3).lists);
  }
}

TEST(Carot, RespectsExclusions) {
  const InteractionLog log = make_log({{"u", "a", 0}, {"v", "b", 0}, {"v", "c", 0}});
  const UserItemSets sets = UserItemSets::from_log(log);
  std::mt19937_64 rng(4);
  const RecommendationLists r = carot(random_scores(2, 3, rng), {}, 2, &sets);
  for (std::size_t u = 0; u < 2; ++u) {
    for (int i : r.lists[u]) EXPECT_FALSE(sets.contains(static_cast<int>(u), i));
  }
}

TEST(FairRec, ExposureFloorValues) {
  EXPECT_EQ(fairrec_exposure_floor(1.0, 2, 2, 4), 1);
  EXPECT_EQ(fairrec_exposure_floor(1.0, 10, 200, 300), 6);
  EXPECT_EQ(fairrec_exposure_floor(0.2, 10, 200, 300), 1);
  EXPECT_EQ(fairrec_exposure_floor(0.1, 10, 200, 300), 0);
}

TEST(FairRec, PigeonholeExample) {
  // Both users prefer items 0 and 1; the floor of 1 forces 2 and 3 in.
  Matrix s(2, 4);
  const double prefs[2][4] = {{0.9, 0.8, 0.2, 0.1}, {0.85, 0.95, 0.3, 0.4}};
  for (std::size_t u = 0; u < 2; ++u) {
    for (std::size_t i = 0; i < 4; ++i) s(u, i) = prefs[u][i];
  }
  const RecommendationLists r = fairrec(s, {1.0, 2, std::nullopt});
  for (int e : exposures(r, 4)) EXPECT_EQ(e, 1);
  EXPECT_EQ(r.lists[0], (std::vector<int>{0, 2}));
  EXPECT_EQ(r.lists[1], (std::vector<int>{1, 3}));
  EXPECT_TRUE(r.warnings.empty());
}

TEST(FairRec, ZeroFloorEqualsTopK) {
  std::mt19937_64 rng(9);
  const Matrix s = random_scores(10, 20, rng);
  ASSERT_EQ(fairrec_exposure_floor(0.2, 2, 10, 20), 0);
  EXPECT_EQ(fairrec(s, {0.2, 2, std::nullopt}).lists, recommend_topk(s, 2).lists);
}

TEST(FairRec, FloorHoldsOnRandomMatrices) {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> users(3, 25), items(3, 40), ks(1, 6);
  int checked = 0;
  while (checked < 60) {
    const std::size_t nu = users(rng), ni = items(rng);
    const int k = ks(rng);
    if (ni > static_cast<std::size_t>(k) * nu || static_cast<std::size_t>(k) > ni) continue;
    const Matrix s = random_scores(nu, ni, rng);
    for (double alpha : {0.2, 0.6, 1.0}) {
      for (std::optional<std::uint64_t> seed : {std::optional<std::uint64_t>{},
                                                std::optional<std::uint64_t>{7}}) {
        const RecommendationLists r = fairrec(s, {alpha, k, seed});
        const int floor_l = fairrec_exposure_floor(alpha, k, nu, ni);
        for (int e : exposures(r, ni)) EXPECT_GE(e, floor_l);
        for (const auto& l : r.lists) {
          EXPECT_EQ(l.size(), static_cast<std::size_t>(k));
          EXPECT_EQ(std::set<int>(l.begin(), l.end()).size(), l.size());
          for (std::size_t a = 1; a < l.size(); ++a) {
            EXPECT_GE(s(&l - r.lists.data(), l[a - 1]), s(&l - r.lists.data(), l[a]));
          }
        }
        EXPECT_TRUE(r.warnings.empty());
      }
    }
    ++checked;
  }
}

TEST(FairRec, Errors) {
  const Matrix s(2, 5, 0.5);
  EXPECT_THAT_THROWS(fairrec(s, {1.0, 2, std::nullopt}), "k too small");
  EXPECT_THROW(fairrec(s, {0.0, 3, std::nullopt}), Error);
  EXPECT_THROW(fairrec(s, {1.5, 3, std::nullopt}), Error);
  EXPECT_THROW(fairrec(s, {1.0, 0, std::nullopt}), Error);
}

}  // namespace
}  // namespace recon
