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
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "recon/common.hpp"
#include "recon/dataset.hpp"
#include "recon/topk.hpp"

namespace recon {

// Desirability metrics average over users that have at least one test item
// and return nullopt when there are none. Relevance is binary.

inline std::optional<double> ndcg_at_k(const RecommendationLists& recs,
                                       const UserItemSets& test) {
  double total = 0.0;
  std::size_t users = 0;
  for (std::size_t u = 0; u < recs.lists.size() && u < test.num_users(); ++u) {
    const auto& relevant = test.items_of(static_cast<int>(u));
    if (relevant.empty()) continue;
    double dcg = 0.0;
    const auto& list = recs.lists[u];
    for (std::size_t r = 0; r < list.size(); ++r) {
      if (std::binary_search(relevant.begin(), relevant.end(), list[r])) {
        dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
      }
    }
    double idcg = 0.0;
    const std::size_t ideal = std::min<std::size_t>(static_cast<std::size_t>(recs.k), relevant.size());
    for (std::size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    total += dcg / idcg;
    ++users;
  }
  if (users == 0) return std::nullopt;
  return total / static_cast<double>(users);
}

inline std::size_t count_hits(const std::vector<int>& list, const std::vector<int>& relevant) {
  std::size_t hits = 0;
  for (int i : list) hits += std::binary_search(relevant.begin(), relevant.end(), i) ? 1 : 0;
  return hits;
}

inline std::optional<double> recall_at_k(const RecommendationLists& recs,
                                         const UserItemSets& test) {
  double total = 0.0;
  std::size_t users = 0;
  for (std::size_t u = 0; u < recs.lists.size() && u < test.num_users(); ++u) {
    const auto& relevant = test.items_of(static_cast<int>(u));
    if (relevant.empty()) continue;
    total += static_cast<double>(count_hits(recs.lists[u], relevant)) /
             static_cast<double>(relevant.size());
    ++users;
  }
  if (users == 0) return std::nullopt;
  return total / static_cast<double>(users);
}

inline std::optional<double> hit_rate_at_k(const RecommendationLists& recs,
                                           const UserItemSets& test) {
  std::size_t hit_users = 0;
  std::size_t users = 0;
  for (std::size_t u = 0; u < recs.lists.size() && u < test.num_users(); ++u) {
    const auto& relevant = test.items_of(static_cast<int>(u));
    if (relevant.empty()) continue;
    if (count_hits(recs.lists[u], relevant) > 0) ++hit_users;
    ++users;
  }
  if (users == 0) return std::nullopt;
  return static_cast<double>(hit_users) / static_cast<double>(users);
}

// MS(i): fraction of users whose list contains item i.
struct MarketShares {
  std::vector<double> shares;
  int k = 0;
};

inline MarketShares market_shares(const RecommendationLists& recs, std::size_t num_items) {
  if (recs.lists.empty()) throw Error("market_shares: no recommendation lists");
  std::vector<std::size_t> counts(num_items, 0);
  for (const auto& list : recs.lists) {
    for (int i : list) {
      if (i < 0 || static_cast<std::size_t>(i) >= num_items) {
        throw Error("market_shares: item id out of range");
      }
      ++counts[i];
    }
  }
  MarketShares ms;
  ms.k = recs.k;
  ms.shares.resize(num_items);
  const double n_users = static_cast<double>(recs.lists.size());
  for (std::size_t i = 0; i < num_items; ++i) {
    ms.shares[i] = static_cast<double>(counts[i]) / n_users;
  }
  return ms;
}

// Normalized negative entropy of the share distribution, in [-1, 0]; -1 when
// every item gets the same share.
inline double congestion(const MarketShares& ms) {
  const std::size_t n = ms.shares.size();
  if (n < 2) throw Error("congestion: undefined for fewer than two items");
  double total = 0.0;
  for (double x : ms.shares) total += x;
  if (!(total > 0.0)) throw Error("congestion: market shares sum to zero");
  // Equal positive shares over m items have entropy ln m; computing it
  // directly keeps the uniform case at exactly -1.
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::size_t positive = 0;
  for (double x : ms.shares) {
    if (x > 0.0) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      ++positive;
    }
  }
  if (lo == hi) {
    return -std::log(static_cast<double>(positive)) / std::log(static_cast<double>(n));
  }
  double entropy = 0.0;
  for (double x : ms.shares) {
    if (x > 0.0) {
      const double q = x / total;
      entropy -= q * std::log(q);
    }
  }
  return -entropy / std::log(static_cast<double>(n));
}

inline double coverage(const RecommendationLists& recs, std::size_t num_items) {
  if (num_items == 0) throw Error("coverage: no items");
  std::vector<char> seen(num_items, 0);
  for (const auto& list : recs.lists) {
    for (int i : list) seen.at(static_cast<std::size_t>(i)) = 1;
  }
  const auto covered = std::count(seen.begin(), seen.end(), 1);
  return static_cast<double>(covered) / static_cast<double>(num_items);
}

// Gini index over all item shares (zeros included), via the sorted form
//   G = sum_r (2r - n - 1) x_(r) / (n sum x),
// summed as symmetric pairs (n + 1 - 2r)(x_(n+1-r) - x_(r)) so that equal
// shares give exactly 0.
inline double gini(const MarketShares& ms) {
  std::vector<double> x = ms.shares;
  const std::size_t n = x.size();
  double total = 0.0;
  for (double v : x) total += v;
  if (n == 0 || !(total > 0.0)) throw Error("gini: market shares sum to zero");
  std::sort(x.begin(), x.end());
  double acc = 0.0;
  for (std::size_t r = 0; r < n / 2; ++r) {
    acc += static_cast<double>(n - 1 - 2 * r) * (x[n - 1 - r] - x[r]);
  }
  return acc / (static_cast<double>(n) * total);
}

// One evaluation row. Missing desirability values are NaN.
struct MetricReport {
  std::string method;
  std::string config;
  std::uint64_t seed = 0;
  int k = 0;
  double ndcg = std::numeric_limits<double>::quiet_NaN();
  double recall = std::numeric_limits<double>::quiet_NaN();
  double hit_rate = std::numeric_limits<double>::quiet_NaN();
  double congestion = 0.0;
  double coverage = 0.0;
  double gini = 0.0;
};

inline MetricReport evaluate(const RecommendationLists& recs, const UserItemSets& test,
                             std::size_t num_items) {
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  MetricReport r;
  r.k = recs.k;
  r.ndcg = ndcg_at_k(recs, test).value_or(kNaN);
  r.recall = recall_at_k(recs, test).value_or(kNaN);
  r.hit_rate = hit_rate_at_k(recs, test).value_or(kNaN);
  const MarketShares ms = market_shares(recs, num_items);
  r.congestion = congestion(ms);
  r.coverage = coverage(recs, num_items);
  r.gini = gini(ms);
  return r;
}

inline constexpr const char* kMetricCsvHeader =
    "method,config,seed,k,ndcg,recall,hit_rate,congestion,coverage,gini";

// Config strings never contain commas: harness ids use ';' between fields.
inline std::string to_csv_row(const MetricReport& r) {
  return r.method + ',' + r.config + ',' + std::to_string(r.seed) + ',' +
         std::to_string(r.k) + ',' + format_double(r.ndcg) + ',' + format_double(r.recall) +
         ',' + format_double(r.hit_rate) + ',' + format_double(r.congestion) + ',' +
         format_double(r.coverage) + ',' + format_double(r.gini);
}

inline MetricReport parse_csv_row(const std::string& line) {
  auto f = split_fields(line);
  if (f.size() != 10) throw Error("parse_csv_row: expected 10 fields: " + line);
  MetricReport r;
  r.method = f[0];
  r.config = f[1];
  std::int64_t seed = 0, k = 0;
  if (!parse_int64(f[2], seed) || !parse_int64(f[3], k)) {
    throw Error("parse_csv_row: bad seed or k: " + line);
  }
  r.seed = static_cast<std::uint64_t>(seed);
  r.k = static_cast<int>(k);
  double* slots[] = {&r.ndcg, &r.recall, &r.hit_rate, &r.congestion, &r.coverage, &r.gini};
  for (int j = 0; j < 6; ++j) {
    if (!parse_double(f[4 + j], *slots[j])) throw Error("parse_csv_row: bad number: " + line);
  }
  return r;
}

}  // namespace recon
