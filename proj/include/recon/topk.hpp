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
#include <fstream>
#include <string>
#include <vector>

#include "recon/common.hpp"
#include "recon/dataset.hpp"

namespace recon {

// Per-user ordered item lists. Every list holds distinct items and has
// length k unless fewer candidates were available.
struct RecommendationLists {
  std::vector<std::vector<int>> lists;
  int k = 0;
  bool train_excluded = false;
  std::vector<std::string> warnings;

  std::size_t num_users() const { return lists.size(); }
  friend bool operator==(const RecommendationLists& a, const RecommendationLists& b) {
    return a.lists == b.lists && a.k == b.k && a.train_excluded == b.train_excluded;
  }
};

// Strict order: higher value first, ties by ascending item id.
inline bool ranks_before(double value_a, int item_a, double value_b, int item_b) {
  return value_a > value_b || (value_a == value_b && item_a < item_b);
}

// Top-k of every row of `values` (scores, transport mass, ...), skipping
// items in `exclude` when given.
inline RecommendationLists top_k_by_row(const Matrix& values, int k,
                                        const UserItemSets* exclude = nullptr) {
  if (k < 1) throw Error("recommend_topk: k must be >= 1");
  if (exclude && (exclude->num_users() != values.rows() ||
                  exclude->num_items() != values.cols())) {
    throw Error("recommend_topk: exclusion sets do not match score shape");
  }
  RecommendationLists out;
  out.k = k;
  out.train_excluded = exclude != nullptr;
  out.lists.resize(values.rows());
  std::size_t short_lists = 0;
  std::vector<int> candidates;
  for (std::size_t u = 0; u < values.rows(); ++u) {
    auto row = values.row(u);
    candidates.clear();
    for (std::size_t i = 0; i < values.cols(); ++i) {
      if (exclude && exclude->contains(static_cast<int>(u), static_cast<int>(i))) continue;
      candidates.push_back(static_cast<int>(i));
    }
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
    if (take < static_cast<std::size_t>(k)) ++short_lists;
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end(),
                      [&](int a, int b) { return ranks_before(row[a], a, row[b], b); });
    out.lists[u].assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take));
  }
  if (short_lists > 0) {
    out.warnings.push_back(std::to_string(short_lists) +
                           " user(s) had fewer than k candidate items; lists shortened");
  }
  return out;
}

inline RecommendationLists recommend_topk(const Matrix& scores, int k,
                                          const UserItemSets* exclude = nullptr) {
  return top_k_by_row(scores, k, exclude);
}

// CSV with header `user_id,rank,item_id`; rank is 1-based.
inline void save_recommendations(const RecommendationLists& recs, const IdIndex& users,
                                 const IdIndex& items, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_recommendations: cannot write '" + path + "'");
  out << "user_id,rank,item_id\n";
  for (std::size_t u = 0; u < recs.lists.size(); ++u) {
    for (std::size_t r = 0; r < recs.lists[u].size(); ++r) {
      out << users.name(static_cast<int>(u)) << ',' << (r + 1) << ','
          << items.name(recs.lists[u][r]) << '\n';
    }
  }
}

inline RecommendationLists load_recommendations(const std::string& path, const IdIndex& users,
                                                const IdIndex& items) {
  std::ifstream in(path);
  if (!in) throw Error("load_recommendations: cannot open '" + path + "'");
  RecommendationLists recs;
  recs.lists.resize(users.size());
  std::vector<std::vector<std::pair<std::int64_t, int>>> ranked(users.size());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    auto f = split_fields(line);
    std::int64_t rank = 0;
    if (f.size() < 3 || !parse_int64(f[1], rank)) {
      throw Error("load_recommendations: " + path + ":" + std::to_string(line_no) +
                  ": malformed row");
    }
    auto u = users.find(f[0]);
    auto i = items.find(f[2]);
    if (!u || !i) {
      throw Error("load_recommendations: " + path + ":" + std::to_string(line_no) +
                  ": unknown user or item id");
    }
    ranked[*u].emplace_back(rank, *i);
  }
  for (std::size_t u = 0; u < ranked.size(); ++u) {
    std::sort(ranked[u].begin(), ranked[u].end());
    for (auto& [r, i] : ranked[u]) recs.lists[u].push_back(i);
    recs.k = std::max(recs.k, static_cast<int>(recs.lists[u].size()));
  }
  return recs;
}

}  // namespace recon
