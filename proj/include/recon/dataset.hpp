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
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "recon/common.hpp"

namespace recon {

inline constexpr std::int64_t kSecondsPerDay = 86400;

// Bijection between external string ids and contiguous integers [0, n).
class IdIndex {
 public:
  // Returns the id of `key`, assigning the next free integer on first sight.
  int intern(const std::string& key) {
    auto [it, inserted] = lookup_.try_emplace(key, static_cast<int>(names_.size()));
    if (inserted) names_.push_back(key);
    return it->second;
  }

  std::optional<int> find(const std::string& key) const {
    auto it = lookup_.find(key);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const IdIndex& a, const IdIndex& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> lookup_;
};

struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

// Interaction with ids resolved through the log's indices.
struct Interaction {
  int user = 0;
  int item = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

// Interactions plus the id spaces they live in. Splits of one log share the
// same index objects.
struct InteractionLog {
  std::vector<Interaction> interactions;
  std::shared_ptr<const IdIndex> users = std::make_shared<IdIndex>();
  std::shared_ptr<const IdIndex> items = std::make_shared<IdIndex>();

  std::size_t size() const { return interactions.size(); }
  bool empty() const { return interactions.empty(); }
  std::size_t num_users() const { return users->size(); }
  std::size_t num_items() const { return items->size(); }

  InteractionRecord record(std::size_t i) const {
    const Interaction& x = interactions.at(i);
    return {users->name(x.user), items->name(x.item), x.timestamp};
  }
};

// Builds a log from external records: drops exact (user, item, timestamp)
// duplicates and assigns ids in first-appearance order.
inline InteractionLog make_log(const std::vector<InteractionRecord>& records) {
  auto users = std::make_shared<IdIndex>();
  auto items = std::make_shared<IdIndex>();
  InteractionLog log;
  std::set<std::tuple<int, int, std::int64_t>> seen;
  for (const auto& r : records) {
    if (r.user_id.empty() || r.item_id.empty()) {
      throw Error("make_log: empty user or item id");
    }
    if (r.timestamp < 0) throw Error("make_log: negative timestamp");
    int u = users->intern(r.user_id);
    int i = items->intern(r.item_id);
    if (seen.emplace(u, i, r.timestamp).second) {
      log.interactions.push_back({u, i, r.timestamp});
    }
  }
  log.users = std::move(users);
  log.items = std::move(items);
  return log;
}

struct CsvFormat {
  char delimiter = ',';
  bool has_header = true;
  // Column names, resolved against the header when one is present.
  std::string user_column = "user_id";
  std::string item_column = "item_id";
  std::string timestamp_column = "timestamp";
  // Positional columns, used when there is no header.
  std::size_t user_position = 0;
  std::size_t item_position = 1;
  std::size_t timestamp_position = 2;
};

inline InteractionLog load_interactions(const std::string& path,
                                        const CsvFormat& format = {}) {
  std::ifstream in(path);
  if (!in) throw Error("load_interactions: cannot open '" + path + "'");

  std::size_t user_col = format.user_position;
  std::size_t item_col = format.item_position;
  std::size_t ts_col = format.timestamp_position;

  std::vector<InteractionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = format.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_fields(line, format.delimiter);
    if (header_pending) {
      header_pending = false;
      auto locate = [&](const std::string& name) {
        auto it = std::find(fields.begin(), fields.end(), name);
        if (it == fields.end()) {
          throw Error("load_interactions: " + path + ":" + std::to_string(line_no) +
                      ": header lacks column '" + name + "'");
        }
        return static_cast<std::size_t>(it - fields.begin());
      };
      user_col = locate(format.user_column);
      item_col = locate(format.item_column);
      ts_col = locate(format.timestamp_column);
      continue;
    }
    const std::size_t needed = std::max({user_col, item_col, ts_col}) + 1;
    if (fields.size() < needed || fields[user_col].empty() ||
        fields[item_col].empty()) {
      throw Error("load_interactions: " + path + ":" + std::to_string(line_no) +
                  ": malformed row");
    }
    std::int64_t ts = 0;
    if (!parse_int64(fields[ts_col], ts) || ts < 0) {
      throw Error("load_interactions: " + path + ":" + std::to_string(line_no) +
                  ": unparsable timestamp '" + fields[ts_col] + "'");
    }
    records.push_back({fields[user_col], fields[item_col], ts});
  }
  if (records.empty()) throw Error("load_interactions: no interactions in '" + path + "'");
  return make_log(records);
}

// Writes the log in the canonical `user_id,item_id,timestamp` layout.
inline void save_interactions(const InteractionLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_interactions: cannot write '" + path + "'");
  out << "user_id,item_id,timestamp\n";
  for (const auto& x : log.interactions) {
    out << log.users->name(x.user) << ',' << log.items->name(x.item) << ','
        << x.timestamp << '\n';
  }
}

enum class FilterMode { kFixpoint, kSinglePass };

// Keeps only interactions whose user and item both have at least
// `min_degree` interactions. In fixpoint mode removals are repeated until
// stable. Indices are rebuilt in first-appearance order.
inline InteractionLog filter_min_degree(const InteractionLog& log, int min_degree,
                                        FilterMode mode = FilterMode::kFixpoint) {
  if (min_degree < 1) throw Error("filter_min_degree: min_degree must be >= 1");
  std::vector<Interaction> alive = log.interactions;
  while (true) {
    std::vector<int> user_deg(log.num_users(), 0);
    std::vector<int> item_deg(log.num_items(), 0);
    for (const auto& x : alive) {
      ++user_deg[x.user];
      ++item_deg[x.item];
    }
    std::vector<Interaction> kept;
    kept.reserve(alive.size());
    for (const auto& x : alive) {
      if (user_deg[x.user] >= min_degree && item_deg[x.item] >= min_degree) {
        kept.push_back(x);
      }
    }
    const bool changed = kept.size() != alive.size();
    alive = std::move(kept);
    if (!changed || mode == FilterMode::kSinglePass) break;
  }
  if (alive.empty()) throw Error("filter_min_degree: filter removed all interactions");

  auto users = std::make_shared<IdIndex>();
  auto items = std::make_shared<IdIndex>();
  InteractionLog out;
  out.interactions.reserve(alive.size());
  for (const auto& x : alive) {
    out.interactions.push_back({users->intern(log.users->name(x.user)),
                                items->intern(log.items->name(x.item)), x.timestamp});
  }
  out.users = std::move(users);
  out.items = std::move(items);
  return out;
}

struct SplitDays {
  int train = 6;
  int validation = 1;
  int test = 3;
};

struct SplitDataset {
  InteractionLog train;
  InteractionLog validation;
  InteractionLog test;
  // [0]: first validation second, [1]: first test second.
  std::array<std::int64_t, 2> boundaries{};
  std::vector<std::string> warnings;

  std::size_t num_users() const { return train.num_users(); }
  std::size_t num_items() const { return train.num_items(); }
};

// Day-based split anchored at the earliest timestamp. Everything at or after
// the second boundary goes to test, so the three parts partition the log.
inline SplitDataset temporal_split(const InteractionLog& log, SplitDays days = {}) {
  if (log.empty()) throw Error("temporal_split: empty log");
  if (days.train < 1 || days.validation < 0 || days.test < 0) {
    throw Error("temporal_split: invalid day counts");
  }
  std::int64_t t0 = log.interactions.front().timestamp;
  for (const auto& x : log.interactions) t0 = std::min(t0, x.timestamp);

  SplitDataset split;
  split.boundaries = {t0 + days.train * kSecondsPerDay,
                      t0 + (days.train + days.validation) * kSecondsPerDay};
  for (auto* part : {&split.train, &split.validation, &split.test}) {
    part->users = log.users;
    part->items = log.items;
  }
  std::set<std::int64_t> distinct_days;
  for (const auto& x : log.interactions) {
    distinct_days.insert((x.timestamp - t0) / kSecondsPerDay);
    if (x.timestamp < split.boundaries[0]) {
      split.train.interactions.push_back(x);
    } else if (x.timestamp < split.boundaries[1]) {
      split.validation.interactions.push_back(x);
    } else {
      split.test.interactions.push_back(x);
    }
  }
  const auto total = static_cast<std::size_t>(days.train + days.validation + days.test);
  if (distinct_days.size() < total) {
    split.warnings.push_back("log spans " + std::to_string(distinct_days.size()) +
                             " distinct days, fewer than the configured " +
                             std::to_string(total));
  }
  if (split.train.empty()) split.warnings.push_back("train split is empty");
  if (split.validation.empty()) split.warnings.push_back("validation split is empty");
  if (split.test.empty()) split.warnings.push_back("test split is empty");
  return split;
}

struct SyntheticSpec {
  int num_users = 200;
  int num_items = 300;
  int interactions_per_user = 10;
  // Item popularity is proportional to rank^(-exponent); 0 is uniform.
  double popularity_exponent = 1.5;
  int num_days = 10;
  std::uint64_t seed = 1;
};

// Skewed implicit-feedback log. Users are "u<n>", items "i<n>" with i0 the
// most popular; every id is registered up front so internal id == n.
inline InteractionLog generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_users < 1 || spec.num_items < 1 || spec.interactions_per_user < 1 ||
      spec.num_days < 1) {
    throw Error("generate_synthetic: counts must be positive");
  }
  if (spec.popularity_exponent < 0) {
    throw Error("generate_synthetic: popularity_exponent must be >= 0");
  }
  if (spec.interactions_per_user > spec.num_items) {
    throw Error("generate_synthetic: interactions_per_user exceeds num_items");
  }
  auto users = std::make_shared<IdIndex>();
  auto items = std::make_shared<IdIndex>();
  for (int u = 0; u < spec.num_users; ++u) users->intern("u" + std::to_string(u));
  for (int i = 0; i < spec.num_items; ++i) items->intern("i" + std::to_string(i));

  std::vector<double> log_weight(static_cast<std::size_t>(spec.num_items));
  for (int i = 0; i < spec.num_items; ++i) {
    log_weight[i] = -spec.popularity_exponent * std::log(static_cast<double>(i + 1));
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> when(0, spec.num_days * kSecondsPerDay - 1);

  InteractionLog log;
  log.interactions.reserve(static_cast<std::size_t>(spec.num_users) *
                           spec.interactions_per_user);
  std::vector<std::pair<double, int>> keys(static_cast<std::size_t>(spec.num_items));
  for (int u = 0; u < spec.num_users; ++u) {
    // Weighted sampling without replacement: the k largest keys
    // log(U)/w are a draw from the successive-sampling distribution.
    for (int i = 0; i < spec.num_items; ++i) {
      double r = unit(rng);
      while (r <= 0.0) r = unit(rng);
      keys[i] = {std::log(r) * std::exp(-log_weight[i]), i};
    }
    std::partial_sort(keys.begin(), keys.begin() + spec.interactions_per_user, keys.end(),
                      [](const auto& a, const auto& b) {
                        return a.first > b.first || (a.first == b.first && a.second < b.second);
                      });
    for (int j = 0; j < spec.interactions_per_user; ++j) {
      log.interactions.push_back({u, keys[j].second, when(rng)});
    }
  }
  log.users = std::move(users);
  log.items = std::move(items);
  return log;
}

// On-disk layout of a prepared split: users.txt and items.txt list the
// external ids in index order (one per line); train.csv, validation.csv and
// test.csv use the interaction CSV layout.
inline void save_split(const SplitDataset& split, const std::string& dir) {
  auto write_ids = [&](const IdIndex& index, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("save_split: cannot write '" + path + "'");
    for (const auto& name : index.names()) out << name << '\n';
  };
  write_ids(*split.train.users, dir + "/users.txt");
  write_ids(*split.train.items, dir + "/items.txt");
  save_interactions(split.train, dir + "/train.csv");
  save_interactions(split.validation, dir + "/validation.csv");
  save_interactions(split.test, dir + "/test.csv");
}

inline SplitDataset load_split(const std::string& dir) {
  auto read_ids = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("load_split: cannot open '" + path + "'");
    auto index = std::make_shared<IdIndex>();
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const std::size_t before = index->size();
      index->intern(line);
      if (index->size() == before) throw Error("load_split: duplicate id '" + line + "' in " + path);
    }
    return index;
  };
  SplitDataset split;
  std::shared_ptr<const IdIndex> users = read_ids(dir + "/users.txt");
  std::shared_ptr<const IdIndex> items = read_ids(dir + "/items.txt");
  auto read_part = [&](const std::string& name, InteractionLog& part) {
    part.users = users;
    part.items = items;
    const std::string path = dir + "/" + name;
    std::ifstream probe(path);
    if (!probe) throw Error("load_split: cannot open '" + path + "'");
    std::string header;
    std::getline(probe, header);
    std::string line;
    if (!std::getline(probe, line)) return;  // header only: empty split
    const InteractionLog raw = load_interactions(path);
    for (const auto& x : raw.interactions) {
      auto u = users->find(raw.users->name(x.user));
      auto i = items->find(raw.items->name(x.item));
      if (!u || !i) throw Error("load_split: " + path + " references an id missing from the index");
      part.interactions.push_back({*u, *i, x.timestamp});
    }
  };
  read_part("train.csv", split.train);
  read_part("validation.csv", split.validation);
  read_part("test.csv", split.test);
  std::int64_t first_val = std::numeric_limits<std::int64_t>::max();
  std::int64_t first_test = std::numeric_limits<std::int64_t>::max();
  for (const auto& x : split.validation.interactions) first_val = std::min(first_val, x.timestamp);
  for (const auto& x : split.test.interactions) first_test = std::min(first_test, x.timestamp);
  split.boundaries = {first_val, first_test};
  return split;
}

// Per-user sorted item lists, the lookup structure behind exclusion and
// negative sampling.
class UserItemSets {
 public:
  UserItemSets() = default;
  UserItemSets(std::size_t num_users, std::size_t num_items)
      : num_items_(num_items), items_(num_users) {}

  static UserItemSets from_log(const InteractionLog& log) {
    UserItemSets sets(log.num_users(), log.num_items());
    for (const auto& x : log.interactions) sets.items_[x.user].push_back(x.item);
    for (auto& v : sets.items_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return sets;
  }

  // From explicit per-user item lists over internal ids.
  static UserItemSets from_lists(std::vector<std::vector<int>> lists, std::size_t num_items) {
    UserItemSets sets(lists.size(), num_items);
    for (auto& v : lists) {
      for (int i : v) {
        if (i < 0 || static_cast<std::size_t>(i) >= num_items) {
          throw Error("UserItemSets: item id out of range");
        }
      }
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    sets.items_ = std::move(lists);
    return sets;
  }

  bool contains(int user, int item) const {
    const auto& v = items_.at(static_cast<std::size_t>(user));
    return std::binary_search(v.begin(), v.end(), item);
  }
  const std::vector<int>& items_of(int user) const {
    return items_.at(static_cast<std::size_t>(user));
  }
  std::size_t num_users() const { return items_.size(); }
  std::size_t num_items() const { return num_items_; }

 private:
  std::size_t num_items_ = 0;
  std::vector<std::vector<int>> items_;
};

}  // namespace recon
