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
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "recon/baselines.hpp"
#include "recon/common.hpp"
#include "recon/config.hpp"
#include "recon/dataset.hpp"
#include "recon/metrics.hpp"
#include "recon/mf_model.hpp"
#include "recon/recon.hpp"
#include "recon/topk.hpp"

namespace recon {

enum class MethodKind { kBase, kRecon, kCarot, kFairRec };

struct MethodSpec {
  MethodKind kind = MethodKind::kBase;
  double lambda = 0.0;
  CarotConfig carot;
  double alpha = 1.0;

  static MethodSpec base() { return {}; }
  static MethodSpec recon(double lambda) {
    MethodSpec m;
    m.kind = MethodKind::kRecon;
    m.lambda = lambda;
    return m;
  }
  static MethodSpec carot_with(double epsilon, CarotTransform t) {
    MethodSpec m;
    m.kind = MethodKind::kCarot;
    m.carot.epsilon = epsilon;
    m.carot.transform = t;
    return m;
  }
  static MethodSpec fairrec(double alpha) {
    MethodSpec m;
    m.kind = MethodKind::kFairRec;
    m.alpha = alpha;
    return m;
  }

  std::string name() const {
    switch (kind) {
      case MethodKind::kBase: return "base";
      case MethodKind::kRecon: return "recon";
      case MethodKind::kCarot: return "carot";
      case MethodKind::kFairRec: return "fairrec";
    }
    return "?";
  }

  // Hyperparameter record; ';'-separated so it fits in one CSV field.
  std::string config_id() const {
    switch (kind) {
      case MethodKind::kBase: return "base";
      case MethodKind::kRecon: return "lambda=" + format_double(lambda);
      case MethodKind::kCarot:
        return "epsilon=" + format_double(carot.epsilon) + ";transform=" +
               to_string(carot.transform);
      case MethodKind::kFairRec: return "alpha=" + format_double(alpha);
    }
    return "?";
  }

  bool needs_base_scores() const {
    return kind == MethodKind::kBase || kind == MethodKind::kCarot ||
           kind == MethodKind::kFairRec;
  }
};

// Where the interactions come from. Synthetic logs are split in memory;
// a CSV log is filtered (min_degree > 0) and split; a prepared directory
// is loaded as is.
struct DatasetSpec {
  enum class Source { kSynthetic, kCsv, kSplitDir };
  Source source = Source::kSynthetic;
  SyntheticSpec synthetic;
  std::string path;
  int min_degree = 0;
  FilterMode filter = FilterMode::kFixpoint;
  SplitDays days;
};

inline SplitDataset prepare_data(const DatasetSpec& spec) {
  switch (spec.source) {
    case DatasetSpec::Source::kSplitDir:
      return load_split(spec.path);
    case DatasetSpec::Source::kCsv:
    case DatasetSpec::Source::kSynthetic: {
      InteractionLog log = spec.source == DatasetSpec::Source::kCsv
                               ? load_interactions(spec.path)
                               : generate_synthetic(spec.synthetic);
      if (spec.min_degree > 0) log = filter_min_degree(log, spec.min_degree, spec.filter);
      return temporal_split(log, spec.days);
    }
  }
  throw Error("prepare_data: unknown source");
}

struct ExperimentGrid {
  std::vector<MethodSpec> methods;
  std::vector<int> ks;
  std::vector<std::uint64_t> seeds;
  DatasetSpec dataset;
  ReconConfig train;

  // Methods, k values and seeds used for the trade-off figures.
  static ExperimentGrid standard() {
    ExperimentGrid g;
    g.methods.push_back(MethodSpec::base());
    for (double l : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) g.methods.push_back(MethodSpec::recon(l));
    for (double e : {1.0, 10.0, 100.0}) {
      for (auto t : {CarotTransform::kIdPlus, CarotTransform::kExpPlus, CarotTransform::kRank,
                     CarotTransform::kNdcgLike}) {
        g.methods.push_back(MethodSpec::carot_with(e, t));
      }
    }
    for (double a : {0.2, 0.4, 0.6, 0.8, 1.0}) g.methods.push_back(MethodSpec::fairrec(a));
    g.ks = {1, 10, 100};
    g.seeds = {1};
    return g;
  }

  // Reads grid keys on top of standard():
  //   methods=base,recon,carot,fairrec   lambdas=...  carot_epsilons=...
  //   carot_transforms=...  fairrec_alphas=...  ks=...  seeds=...
  //   data.source=synthetic|csv|split  data.path=...  data.min_degree=...
  //   data.single_pass=false  synth.users/items/per_user/exponent/days/seed
  // plus every ReconConfig key for the shared training setup.
  static ExperimentGrid from_kv(const KeyValueConfig& kv) {
    ExperimentGrid g = standard();
    g.train = ReconConfig::from_kv(kv);
    const auto families = kv.get_list("methods", {"base", "recon", "carot", "fairrec"});
    auto enabled = [&](const std::string& f) {
      return std::find(families.begin(), families.end(), f) != families.end();
    };
    for (const auto& f : families) {
      if (f != "base" && f != "recon" && f != "carot" && f != "fairrec") {
        throw Error("grid: unknown method family '" + f + "'");
      }
    }
    g.methods.clear();
    if (enabled("base")) g.methods.push_back(MethodSpec::base());
    if (enabled("recon")) {
      for (double l : kv.get_double_list("lambdas", {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6})) {
        g.methods.push_back(MethodSpec::recon(l));
      }
    }
    if (enabled("carot")) {
      const auto eps = kv.get_double_list("carot_epsilons", {1.0, 10.0, 100.0});
      const auto ts =
          kv.get_list("carot_transforms", {"IdPlus", "ExpPlus", "Rank", "NdcgLike"});
      for (double e : eps) {
        for (const auto& t : ts) g.methods.push_back(MethodSpec::carot_with(e, parse_carot_transform(t)));
      }
    }
    if (enabled("fairrec")) {
      for (double a : kv.get_double_list("fairrec_alphas", {0.2, 0.4, 0.6, 0.8, 1.0})) {
        g.methods.push_back(MethodSpec::fairrec(a));
      }
    }
    g.ks.clear();
    for (auto k : kv.get_int_list("ks", {1, 10, 100})) g.ks.push_back(static_cast<int>(k));
    g.seeds.clear();
    for (auto s : kv.get_int_list("seeds", {1})) g.seeds.push_back(static_cast<std::uint64_t>(s));

    const std::string source = kv.get_string("data.source", "synthetic");
    if (source == "synthetic") {
      g.dataset.source = DatasetSpec::Source::kSynthetic;
    } else if (source == "csv") {
      g.dataset.source = DatasetSpec::Source::kCsv;
      g.dataset.min_degree = 4;
    } else if (source == "split") {
      g.dataset.source = DatasetSpec::Source::kSplitDir;
    } else {
      throw Error("grid: unknown data.source '" + source + "'");
    }
    g.dataset.path = kv.get_string("data.path", "");
    g.dataset.min_degree = static_cast<int>(kv.get_int("data.min_degree", g.dataset.min_degree));
    g.dataset.filter = kv.get_bool("data.single_pass", false) ? FilterMode::kSinglePass
                                                               : FilterMode::kFixpoint;
    auto& s = g.dataset.synthetic;
    s.num_users = static_cast<int>(kv.get_int("synth.users", s.num_users));
    s.num_items = static_cast<int>(kv.get_int("synth.items", s.num_items));
    s.interactions_per_user = static_cast<int>(kv.get_int("synth.per_user", s.interactions_per_user));
    s.popularity_exponent = kv.get_double("synth.exponent", s.popularity_exponent);
    s.num_days = static_cast<int>(kv.get_int("synth.days", s.num_days));
    s.seed = static_cast<std::uint64_t>(kv.get_int("synth.seed", static_cast<std::int64_t>(s.seed)));
    return g;
  }
};

// k values a method is evaluated at; FairRec is never run at k = 1.
inline std::vector<int> scheduled_ks(const MethodSpec& m, const std::vector<int>& ks) {
  std::vector<int> out;
  for (int k : ks) {
    if (m.kind == MethodKind::kFairRec && k == 1) continue;
    out.push_back(k);
  }
  return out;
}

// Trains (or post-processes) once and evaluates at every scheduled k.
// `base_scores`, when given, must be the base model's scores for the same
// seed; it only saves a retrain.
inline std::vector<MetricReport> run_experiment(const MethodSpec& method, const SplitDataset& data,
                                                const std::vector<int>& ks, std::uint64_t seed,
                                                const ReconConfig& train_cfg,
                                                const Matrix* base_scores = nullptr) {
  const UserItemSets exclude = UserItemSets::from_log(data.train);
  const UserItemSets test = UserItemSets::from_log(data.test);
  const std::size_t n_items = data.num_items();
  ReconConfig cfg = train_cfg;
  cfg.seed = seed;

  auto base = [&]() -> Matrix {
    if (base_scores) return *base_scores;
    return score_matrix(train_base(cfg, data).params);
  };

  std::vector<MetricReport> rows;
  auto emit = [&](const RecommendationLists& recs) {
    MetricReport r = evaluate(recs, test, n_items);
    r.method = method.name();
    r.config = method.config_id();
    r.seed = seed;
    rows.push_back(std::move(r));
  };
  const std::vector<int> plan_ks = scheduled_ks(method, ks);
  switch (method.kind) {
    case MethodKind::kBase: {
      const Matrix scores = base();
      for (int k : plan_ks) emit(recommend_topk(scores, k, &exclude));
      break;
    }
    case MethodKind::kRecon: {
      cfg.lambda = method.lambda;
      const Matrix scores = score_matrix(train(cfg, data).params);
      for (int k : plan_ks) emit(recommend_topk(scores, k, &exclude));
      break;
    }
    case MethodKind::kCarot: {
      const Matrix scores = base();
      const Matrix cost = carot_transform(scores, method.carot.transform);
      const TransportPlan plan =
          sinkhorn(cost, Marginals::uniform(scores.rows(), scores.cols()),
                   {method.carot.epsilon, method.carot.sinkhorn_iters, method.carot.sinkhorn_tol});
      for (int k : plan_ks) emit(top_k_by_row(plan.values, k, &exclude));
      break;
    }
    case MethodKind::kFairRec: {
      const Matrix scores = base();
      for (int k : plan_ks) {
        FairRecConfig fc;
        fc.alpha = method.alpha;
        fc.k = k;
        emit(fairrec(scores, fc, &exclude));
      }
      break;
    }
  }
  return rows;
}

// Runs fn(0..n-1) on `parallelism` threads pulling indices from a shared
// counter. Exceptions are captured per index.
inline std::vector<std::optional<std::string>> parallel_for(
    std::size_t n, int parallelism, const std::function<void(std::size_t)>& fn) {
  std::vector<std::optional<std::string>> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t idx = next++; idx < n; idx = next++) {
      try {
        fn(idx);
      } catch (const std::exception& e) {
        errors[idx] = e.what();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(parallelism, static_cast<int>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return errors;
}

struct RunFailure {
  std::string method;
  std::string config;
  std::uint64_t seed = 0;
  std::string error;
};

struct SweepResult {
  // Completion order; sort_rows() gives the canonical order.
  std::vector<MetricReport> rows;
  std::vector<RunFailure> failures;
};

inline void sort_rows(std::vector<MetricReport>& rows) {
  std::sort(rows.begin(), rows.end(), [](const MetricReport& a, const MetricReport& b) {
    return std::tie(a.method, a.config, a.seed, a.k) < std::tie(b.method, b.config, b.seed, b.k);
  });
}

// Cross product of methods x seeds, each run evaluated at every k. Runs are
// independent; rows are appended by a single lock holder as runs finish.
inline SweepResult sweep(const ExperimentGrid& grid, int parallelism,
                         const SplitDataset* prepared = nullptr) {
  if (grid.methods.empty() || grid.ks.empty() || grid.seeds.empty()) {
    throw Error("sweep: empty experiment grid");
  }
  std::optional<SplitDataset> owned;
  if (!prepared) owned = prepare_data(grid.dataset);
  const SplitDataset& data = prepared ? *prepared : *owned;

  SweepResult result;
  std::mutex sink;

  // Base-model scores per seed, shared read-only by the post-processing runs.
  const bool need_base = std::any_of(grid.methods.begin(), grid.methods.end(),
                                     [](const MethodSpec& m) { return m.needs_base_scores(); });
  std::vector<std::optional<Matrix>> base_scores(grid.seeds.size());
  if (need_base) {
    auto errs = parallel_for(grid.seeds.size(), parallelism, [&](std::size_t s) {
      ReconConfig cfg = grid.train;
      cfg.seed = grid.seeds[s];
      base_scores[s] = score_matrix(train_base(cfg, data).params);
    });
    for (std::size_t s = 0; s < errs.size(); ++s) {
      if (errs[s]) result.failures.push_back({"base", "base", grid.seeds[s], *errs[s]});
    }
  }

  struct Task {
    std::size_t method;
    std::size_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t m = 0; m < grid.methods.size(); ++m) {
    if (scheduled_ks(grid.methods[m], grid.ks).empty()) continue;
    for (std::size_t s = 0; s < grid.seeds.size(); ++s) tasks.push_back({m, s});
  }
  auto errs = parallel_for(tasks.size(), parallelism, [&](std::size_t t) {
    const MethodSpec& m = grid.methods[tasks[t].method];
    const Matrix* base = nullptr;
    if (m.needs_base_scores()) {
      if (!base_scores[tasks[t].seed]) throw Error("base model unavailable for this seed");
      base = &*base_scores[tasks[t].seed];
    }
    auto rows = run_experiment(m, data, grid.ks, grid.seeds[tasks[t].seed], grid.train, base);
    std::lock_guard<std::mutex> lock(sink);
    for (auto& r : rows) result.rows.push_back(std::move(r));
  });
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (errs[t]) {
      const MethodSpec& m = grid.methods[tasks[t].method];
      result.failures.push_back({m.name(), m.config_id(), grid.seeds[tasks[t].seed], *errs[t]});
    }
  }
  return result;
}

// Both axes oriented so that larger is better.
struct ParetoPoint {
  double x = 0.0;
  double y = 0.0;
  std::string method;
  std::string config;
  int k = 0;
  bool pareto_within_method = false;
  bool pareto_global = false;
};

// Flags the non-dominated points: q dominates p when q >= p on both axes and
// q > p on at least one. Duplicated front points are all kept. Points with a
// NaN coordinate are never on the front. O(n log n).
inline std::vector<bool> non_dominated(const std::vector<std::pair<double, double>>& pts) {
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (!std::isnan(pts[k].first) && !std::isnan(pts[k].second)) order.push_back(k);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pts[a].first > pts[b].first ||
           (pts[a].first == pts[b].first && pts[a].second > pts[b].second);
  });
  std::vector<bool> flags(pts.size(), false);
  double best_y_strictly_right = -std::numeric_limits<double>::infinity();
  std::size_t g = 0;
  while (g < order.size()) {
    // Group of equal x; its first element has the group's max y.
    std::size_t end = g;
    const double x = pts[order[g]].first;
    while (end < order.size() && pts[order[end]].first == x) ++end;
    const double group_max = pts[order[g]].second;
    if (group_max > best_y_strictly_right) {
      for (std::size_t j = g; j < end && pts[order[j]].second == group_max; ++j) {
        flags[order[j]] = true;
      }
    }
    best_y_strictly_right = std::max(best_y_strictly_right, group_max);
    g = end;
  }
  return flags;
}

// Sets pareto_global over all points and pareto_within_method per method.
inline void pareto_front(std::vector<ParetoPoint>& points) {
  std::vector<std::pair<double, double>> xy;
  xy.reserve(points.size());
  for (const auto& p : points) xy.emplace_back(p.x, p.y);
  const auto global = non_dominated(xy);
  std::map<std::string, std::vector<std::size_t>> by_method;
  for (std::size_t k = 0; k < points.size(); ++k) {
    points[k].pareto_global = global[k];
    by_method[points[k].method].push_back(k);
  }
  for (const auto& [method, idx] : by_method) {
    std::vector<std::pair<double, double>> sub;
    for (auto k : idx) sub.emplace_back(points[k].x, points[k].y);
    const auto local = non_dominated(sub);
    for (std::size_t j = 0; j < idx.size(); ++j) points[idx[j]].pareto_within_method = local[j];
  }
}

struct MetricAxis {
  const char* name;
  double (*value)(const MetricReport&);
};

inline const std::vector<MetricAxis>& desirability_axes() {
  static const std::vector<MetricAxis> axes = {
      {"ndcg", [](const MetricReport& r) { return r.ndcg; }},
      {"recall", [](const MetricReport& r) { return r.recall; }},
      {"hit_rate", [](const MetricReport& r) { return r.hit_rate; }},
  };
  return axes;
}

// Sign-adjusted so larger is better: -congestion, coverage, -gini.
inline const std::vector<MetricAxis>& congestion_axes() {
  static const std::vector<MetricAxis> axes = {
      {"congestion", [](const MetricReport& r) { return -r.congestion; }},
      {"coverage", [](const MetricReport& r) { return r.coverage; }},
      {"gini", [](const MetricReport& r) { return -r.gini; }},
  };
  return axes;
}

// Mean over seeds for each (method, config, k).
inline std::vector<MetricReport> average_over_seeds(const std::vector<MetricReport>& rows) {
  std::map<std::tuple<std::string, std::string, int>, std::vector<const MetricReport*>> groups;
  for (const auto& r : rows) groups[{r.method, r.config, r.k}].push_back(&r);
  std::vector<MetricReport> out;
  for (const auto& [key, members] : groups) {
    MetricReport m;
    std::tie(m.method, m.config, m.k) = key;
    m.seed = 0;
    double* fields[] = {&m.ndcg, &m.recall, &m.hit_rate, &m.congestion, &m.coverage, &m.gini};
    for (double* f : fields) *f = 0.0;
    for (const MetricReport* r : members) {
      const double vals[] = {r->ndcg, r->recall, r->hit_rate, r->congestion, r->coverage, r->gini};
      for (int j = 0; j < 6; ++j) *fields[j] += vals[j];
    }
    for (double* f : fields) *f /= static_cast<double>(members.size());
    out.push_back(m);
  }
  return out;
}

struct FigurePoints {
  std::string x_metric;
  std::string y_metric;
  std::vector<ParetoPoint> points;
};

// One figure per (desirability, congestion-related) pair; Pareto flags are
// computed separately for every k.
inline std::vector<FigurePoints> build_figures(const std::vector<MetricReport>& rows) {
  const auto averaged = average_over_seeds(rows);
  std::vector<FigurePoints> figures;
  for (const auto& dx : desirability_axes()) {
    for (const auto& cy : congestion_axes()) {
      FigurePoints fig{dx.name, cy.name, {}};
      std::map<int, std::vector<ParetoPoint>> by_k;
      for (const auto& r : averaged) {
        by_k[r.k].push_back({dx.value(r), cy.value(r), r.method, r.config, r.k, false, false});
      }
      for (auto& [k, pts] : by_k) {
        pareto_front(pts);
        for (auto& p : pts) fig.points.push_back(std::move(p));
      }
      figures.push_back(std::move(fig));
    }
  }
  return figures;
}

inline constexpr const char* kParetoCsvHeader =
    "x_metric,y_metric,k,method,config,x,y,pareto_within_method,pareto_global";
inline constexpr const char* kScatterCsvHeader = "k,method,config,x,y,is_pareto";

inline void write_results_csv(const std::vector<MetricReport>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << kMetricCsvHeader << '\n';
  for (const auto& r : rows) out << to_csv_row(r) << '\n';
  if (!out) throw Error("write failed for '" + path + "'");
}

inline std::vector<MetricReport> read_results_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMetricCsvHeader) {
    throw Error("'" + path + "' does not start with the results header");
  }
  std::vector<MetricReport> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(parse_csv_row(line));
  }
  return rows;
}

// Writes results.csv (rows sorted), pareto.csv and scatter_<x>_vs_<y>.csv; returns the
// written paths.
inline std::vector<std::string> emit_report(const std::vector<MetricReport>& rows,
                                            const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw Error("emit_report: cannot create directory '" + out_dir + "'");
  }
  std::vector<std::string> written;
  const std::string results = out_dir + "/results.csv";
  std::vector<MetricReport> sorted = rows;
  sort_rows(sorted);
  write_results_csv(sorted, results);
  written.push_back(results);

  const auto figures = build_figures(rows);
  const std::string pareto_path = out_dir + "/pareto.csv";
  std::ofstream pareto(pareto_path);
  if (!pareto) throw Error("emit_report: cannot write '" + pareto_path + "'");
  pareto << kParetoCsvHeader << '\n';
  written.push_back(pareto_path);
  for (const auto& fig : figures) {
    const std::string scatter_path =
        out_dir + "/scatter_" + fig.x_metric + "_vs_" + fig.y_metric + ".csv";
    std::ofstream scatter(scatter_path);
    if (!scatter) throw Error("emit_report: cannot write '" + scatter_path + "'");
    scatter << kScatterCsvHeader << '\n';
    for (const auto& p : fig.points) {
      pareto << fig.x_metric << ',' << fig.y_metric << ',' << p.k << ',' << p.method << ','
             << p.config << ',' << format_double(p.x) << ',' << format_double(p.y) << ','
             << (p.pareto_within_method ? 1 : 0) << ',' << (p.pareto_global ? 1 : 0) << '\n';
      scatter << p.k << ',' << p.method << ',' << p.config << ',' << format_double(p.x) << ','
              << format_double(p.y) << ',' << (p.pareto_global ? 1 : 0) << '\n';
    }
    written.push_back(scatter_path);
  }
  if (!pareto) throw Error("emit_report: write failed for '" + pareto_path + "'");
  return written;
}

inline constexpr const char* kOutputRootEnv = "RECON_OUTPUT_ROOT";

// Relative output paths are placed under $RECON_OUTPUT_ROOT when it is set.
inline std::string resolve_output_path(const std::string& path) {
  const char* root = std::getenv(kOutputRootEnv);
  if (!root || !*root || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(root) / path).string();
}

}  // namespace recon
