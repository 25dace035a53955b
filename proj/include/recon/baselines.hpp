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
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "recon/common.hpp"
#include "recon/dataset.hpp"
#include "recon/ot_sinkhorn.hpp"
#include "recon/topk.hpp"

namespace recon {

// Post-processing baselines over a fixed score matrix.

enum class CarotTransform { kIdPlus, kExpPlus, kRank, kNdcgLike };

inline std::string to_string(CarotTransform t) {
  switch (t) {
    case CarotTransform::kIdPlus: return "IdPlus";
    case CarotTransform::kExpPlus: return "ExpPlus";
    case CarotTransform::kRank: return "Rank";
    case CarotTransform::kNdcgLike: return "NdcgLike";
  }
  return "?";
}

inline CarotTransform parse_carot_transform(const std::string& name) {
  for (auto t : {CarotTransform::kIdPlus, CarotTransform::kExpPlus, CarotTransform::kRank,
                 CarotTransform::kNdcgLike}) {
    if (to_string(t) == name) return t;
  }
  throw Error("unknown CAROT transform '" + name + "'");
}

struct CarotConfig {
  double epsilon = 1.0;
  CarotTransform transform = CarotTransform::kIdPlus;
  int sinkhorn_iters = 1000;
  double sinkhorn_tol = 1e-9;
};

// Per-user ranks, 1 = highest score, ties by ascending item id.
inline Matrix score_ranks(const Matrix& scores) {
  Matrix ranks(scores.rows(), scores.cols());
  std::vector<int> order(scores.cols());
  for (std::size_t u = 0; u < scores.rows(); ++u) {
    auto row = scores.row(u);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return ranks_before(row[a], a, row[b], b); });
    for (std::size_t r = 0; r < order.size(); ++r) {
      ranks(u, static_cast<std::size_t>(order[r])) = static_cast<double>(r + 1);
    }
  }
  return ranks;
}

// Score-to-cost transforms; each is decreasing in the user's preference.
inline Matrix carot_transform(const Matrix& scores, CarotTransform kind) {
  Matrix cost(scores.rows(), scores.cols());
  const auto& p = scores.values();
  auto& d = cost.values();
  switch (kind) {
    case CarotTransform::kIdPlus:
      for (std::size_t k = 0; k < p.size(); ++k) d[k] = 1.0 - p[k];
      break;
    case CarotTransform::kExpPlus:
      for (std::size_t k = 0; k < p.size(); ++k) d[k] = std::exp(-p[k]);
      break;
    case CarotTransform::kRank: {
      const Matrix ranks = score_ranks(scores);
      const double n = static_cast<double>(scores.cols());
      for (std::size_t k = 0; k < p.size(); ++k) d[k] = ranks.values()[k] / n;
      break;
    }
    case CarotTransform::kNdcgLike: {
      const Matrix ranks = score_ranks(scores);
      for (std::size_t k = 0; k < p.size(); ++k) {
        d[k] = 1.0 - 1.0 / std::log2(1.0 + ranks.values()[k]);
      }
      break;
    }
  }
  return cost;
}

// OT re-ranking: solve entropic OT on the transformed cost with uniform
// marginals, then recommend the k items carrying the most transport mass.
inline RecommendationLists carot(const Matrix& scores, const CarotConfig& cfg, int k,
                                 const UserItemSets* exclude = nullptr) {
  const Matrix cost = carot_transform(scores, cfg.transform);
  const TransportPlan plan =
      sinkhorn(cost, Marginals::uniform(scores.rows(), scores.cols()),
               {cfg.epsilon, cfg.sinkhorn_iters, cfg.sinkhorn_tol});
  return top_k_by_row(plan.values, k, exclude);
}

struct FairRecConfig {
  double alpha = 1.0;
  int k = 10;
  // Phase-1 visiting order: ascending user id unless a shuffle seed is set.
  std::optional<std::uint64_t> shuffle_seed;
};

namespace detail {

// The greedy phase can stall with floors unmet even though a feasible
// allocation exists. Each pass finds an alternating path from an item below
// the floor to a user with a free slot: every user on the path takes the
// previous item and hands over one it holds, so only the start item gains
// exposure and the end user gains a slot.
inline void repair_exposure_floor(const std::vector<int>& order, std::size_t k, int floor_l,
                                  std::vector<std::vector<int>>& held,
                                  std::vector<std::vector<char>>& holds,
                                  std::vector<int>& exposure) {
  const std::size_t n_items = exposure.size();
  const std::size_t n_users = held.size();
  for (std::size_t start = 0; start < n_items; ++start) {
    while (exposure[start] < floor_l) {
      // parent[item] = (user who holds it and would give it up, item they take)
      std::vector<std::pair<int, int>> parent(n_items, {-1, -1});
      std::vector<char> seen_item(n_items, 0), seen_user(n_users, 0);
      std::vector<int> queue{static_cast<int>(start)};
      seen_item[start] = 1;
      int end_user = -1, end_item = -1;
      for (std::size_t q = 0; q < queue.size() && end_user < 0; ++q) {
        const int x = queue[q];
        for (int v : order) {
          if (seen_user[v] || holds[v][x]) continue;
          if (held[v].size() < k) {
            end_user = v;
            end_item = x;
            break;
          }
          seen_user[v] = 1;
          for (int j : held[v]) {
            if (seen_item[j]) continue;
            seen_item[j] = 1;
            parent[j] = {v, x};
            queue.push_back(j);
          }
        }
      }
      if (end_user < 0) return;
      holds[end_user][end_item] = 1;
      held[end_user].push_back(end_item);
      for (int x = end_item; x != static_cast<int>(start);) {
        const auto [v, prev] = parent[x];
        holds[v][x] = 0;
        holds[v][prev] = 1;
        std::replace(held[v].begin(), held[v].end(), x, prev);
        x = prev;
      }
      ++exposure[start];
    }
  }
}

}  // namespace detail

inline int fairrec_exposure_floor(double alpha, int k, std::size_t num_users,
                                  std::size_t num_items) {
  return static_cast<int>(std::floor(alpha * k * static_cast<double>(num_users) /
                                     static_cast<double>(num_items)));
}

// Greedy two-phase allocation with a producer-side exposure floor
// l = floor(alpha * k * |U| / |I|).
//   Phase 1: round-robin over users; each picks its best unheld item among
//   items still below the floor, until all floors are met or no user can pick.
//   If it stalls, alternating-path repair completes the remaining floors.
//   Phase 2: users fill their remaining slots with their best unheld items,
//   uncapped.
// Lists are returned sorted by score, ties by item id.
inline RecommendationLists fairrec(const Matrix& scores, const FairRecConfig& cfg,
                                   const UserItemSets* exclude = nullptr) {
  const std::size_t n_users = scores.rows();
  const std::size_t n_items = scores.cols();
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw Error("fairrec: alpha must be in (0, 1]");
  if (cfg.k < 1) throw Error("fairrec: k must be >= 1");
  if (n_items > static_cast<std::size_t>(cfg.k) * n_users) {
    throw Error("fairrec: k too small for |I| (requires |I| <= k * |U|)");
  }
  const int floor_l = fairrec_exposure_floor(cfg.alpha, cfg.k, n_users, n_items);
  const std::size_t k = static_cast<std::size_t>(cfg.k);

  // Per-user preference order over all non-excluded items.
  std::vector<std::vector<int>> prefs(n_users);
  for (std::size_t u = 0; u < n_users; ++u) {
    auto row = scores.row(u);
    for (std::size_t i = 0; i < n_items; ++i) {
      if (exclude && exclude->contains(static_cast<int>(u), static_cast<int>(i))) continue;
      prefs[u].push_back(static_cast<int>(i));
    }
    std::sort(prefs[u].begin(), prefs[u].end(),
              [&](int a, int b) { return ranks_before(row[a], a, row[b], b); });
  }

  std::vector<int> order(n_users);
  std::iota(order.begin(), order.end(), 0);
  if (cfg.shuffle_seed) {
    std::mt19937_64 rng(*cfg.shuffle_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<std::vector<int>> held(n_users);
  std::vector<std::vector<char>> holds(n_users, std::vector<char>(n_items, 0));
  std::vector<int> exposure(n_items, 0);
  std::size_t unmet = floor_l > 0 ? n_items : 0;

  while (unmet > 0) {
    bool progressed = false;
    for (int u : order) {
      if (unmet == 0) break;
      if (held[u].size() >= k) continue;
      for (int i : prefs[u]) {
        if (holds[u][i] || exposure[i] >= floor_l) continue;
        holds[u][i] = 1;
        held[u].push_back(i);
        if (++exposure[i] == floor_l) --unmet;
        progressed = true;
        break;
      }
    }
    if (!progressed) break;
  }
  if (unmet > 0) {
    detail::repair_exposure_floor(order, k, floor_l, held, holds, exposure);
  }

  RecommendationLists out;
  out.k = cfg.k;
  out.train_excluded = exclude != nullptr;
  out.lists.resize(n_users);
  std::size_t short_lists = 0;
  for (std::size_t u = 0; u < n_users; ++u) {
    for (int i : prefs[u]) {
      if (held[u].size() >= k) break;
      if (holds[u][i]) continue;
      holds[u][i] = 1;
      held[u].push_back(i);
      ++exposure[i];
    }
    if (held[u].size() < k) ++short_lists;
    auto row = scores.row(u);
    std::sort(held[u].begin(), held[u].end(),
              [&](int a, int b) { return ranks_before(row[a], a, row[b], b); });
    out.lists[u] = std::move(held[u]);
  }
  unmet = static_cast<std::size_t>(
      std::count_if(exposure.begin(), exposure.end(), [&](int e) { return e < floor_l; }));
  if (unmet > 0) {
    out.warnings.push_back(std::to_string(unmet) + " item(s) below the exposure floor");
  }
  if (short_lists > 0) {
    out.warnings.push_back(std::to_string(short_lists) +
                           " user(s) had fewer than k candidate items; lists shortened");
  }
  return out;
}

}  // namespace recon
