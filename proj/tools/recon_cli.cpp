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
//
// Command-line front end:
//   recon prepare  --input log.csv --out split/
//   recon synth    --out log.csv
//   recon train    --data split/ --config train.cfg --out model.ckpt
//   recon baseline --method carot|fairrec --scores model.ckpt --data split/ --k 10 --out recs.csv
//   recon evaluate --data split/ (--recs recs.csv | --scores model.ckpt) --k 10 --out metrics.csv
//   recon sweep    --config sweep.cfg --out report/
//   recon pareto   --results results.csv --out report/
//
// Every subcommand reads an optional key=value --config; flags and
// --set key=value override it. Relative output paths land under
// $RECON_OUTPUT_ROOT when it is set.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "recon/baselines.hpp"
#include "recon/harness.hpp"
#include "recon/recon.hpp"

namespace {

using namespace recon;

// Config file plus command-line overrides, merged after parsing.
struct Settings {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> sets;

  KeyValueConfig merged() const {
    KeyValueConfig kv = config_path.empty() ? KeyValueConfig() : KeyValueConfig::load(config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw Error("--set expects key=value, got '" + s + "'");
      kv.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : overrides) kv.set(k, v);
    return kv;
  }
};

void add_settings(CLI::App* cmd, Settings& s) {
  cmd->add_option("--config", s.config_path, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", s.sets, "override a config key (key=value, repeatable)");
}

// A flag that writes `key` in the merged config.
void add_key(CLI::App* cmd, Settings& s, const std::string& flag, const std::string& key,
             const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&s, key](const std::string& v) { s.overrides[key] = v; }, help);
}

std::string output_path(const std::string& path) {
  const std::string out = resolve_output_path(path);
  const auto parent = std::filesystem::path(out).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  return out;
}

std::string output_dir(const std::string& path) {
  const std::string out = resolve_output_path(path);
  std::filesystem::create_directories(out);
  return out;
}

SyntheticSpec synthetic_from(const KeyValueConfig& kv) {
  SyntheticSpec s;
  s.num_users = static_cast<int>(kv.get_int("synth.users", s.num_users));
  s.num_items = static_cast<int>(kv.get_int("synth.items", s.num_items));
  s.interactions_per_user = static_cast<int>(kv.get_int("synth.per_user", s.interactions_per_user));
  s.popularity_exponent = kv.get_double("synth.exponent", s.popularity_exponent);
  s.num_days = static_cast<int>(kv.get_int("synth.days", s.num_days));
  s.seed = static_cast<std::uint64_t>(kv.get_int("synth.seed", static_cast<std::int64_t>(s.seed)));
  return s;
}

void print_split(const SplitDataset& split) {
  std::printf("users %zu, items %zu, train %zu, validation %zu, test %zu\n", split.num_users(),
              split.num_items(), split.train.size(), split.validation.size(), split.test.size());
  for (const auto& w : split.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

void print_warnings(const RecommendationLists& recs) {
  for (const auto& w : recs.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

Matrix scores_from_checkpoint(const std::string& path, const SplitDataset& data) {
  const ModelParams params = load_checkpoint(path);
  if (params.num_users != data.num_users() || params.num_items != data.num_items()) {
    throw Error("checkpoint '" + path + "' does not match the dataset shape");
  }
  return score_matrix(params);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Congestion-aware recommendation toolkit"};
  app.require_subcommand(1);

  // prepare
  Settings prep_s;
  std::string prep_in, prep_out;
  auto* prep = app.add_subcommand("prepare", "Filter and temporally split an interaction CSV");
  add_settings(prep, prep_s);
  prep->add_option("--input", prep_in, "CSV with header user_id,item_id,timestamp")
      ->required()
      ->check(CLI::ExistingFile);
  prep->add_option("--out", prep_out, "output directory")->required();
  add_key(prep, prep_s, "--min-degree", "min_degree", "minimum user and item degree (default 4)");
  add_key(prep, prep_s, "--train-days", "train_days", "days in the training window (default 6)");
  add_key(prep, prep_s, "--validation-days", "validation_days", "validation days (default 1)");
  add_key(prep, prep_s, "--test-days", "test_days", "test days (default 3)");
  prep->add_flag_function(
      "--single-pass", [&](std::int64_t) { prep_s.overrides["single_pass"] = "true"; },
      "filter once instead of iterating to a fixpoint");

  // synth
  Settings syn_s;
  std::string syn_out;
  auto* syn = app.add_subcommand("synth", "Generate a popularity-skewed interaction CSV");
  add_settings(syn, syn_s);
  syn->add_option("--out", syn_out, "output CSV")->required();
  add_key(syn, syn_s, "--users", "synth.users", "number of users");
  add_key(syn, syn_s, "--items", "synth.items", "number of items");
  add_key(syn, syn_s, "--per-user", "synth.per_user", "interactions per user");
  add_key(syn, syn_s, "--exponent", "synth.exponent", "popularity exponent");
  add_key(syn, syn_s, "--days", "synth.days", "days spanned by the log");
  add_key(syn, syn_s, "--seed", "synth.seed", "generator seed");

  // train
  Settings tr_s;
  std::string tr_data, tr_out, tr_history;
  auto* tr = app.add_subcommand("train", "Train the base or congestion-regularised model");
  add_settings(tr, tr_s);
  tr->add_option("--data", tr_data, "prepared split directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", tr_out, "checkpoint path")->required();
  tr->add_option("--history", tr_history, "per-epoch history CSV");
  add_key(tr, tr_s, "--lambda", "lambda", "congestion weight (0 trains the base model)");
  add_key(tr, tr_s, "--epsilon", "epsilon", "entropic regularisation");
  add_key(tr, tr_s, "--epochs", "epochs", "training epochs");
  add_key(tr, tr_s, "--seed", "seed", "training seed");

  // baseline
  Settings bl_s;
  std::string bl_method, bl_scores, bl_data, bl_out;
  int bl_k = 10;
  auto* bl = app.add_subcommand("baseline", "Re-rank a checkpoint's scores with CAROT or FairRec");
  add_settings(bl, bl_s);
  bl->add_option("--method", bl_method, "carot or fairrec")
      ->required()
      ->check(CLI::IsMember({"carot", "fairrec"}));
  bl->add_option("--scores", bl_scores, "checkpoint")->required()->check(CLI::ExistingFile);
  bl->add_option("--data", bl_data, "prepared split directory")->required()->check(CLI::ExistingDirectory);
  bl->add_option("--k", bl_k, "list length")->check(CLI::PositiveNumber);
  bl->add_option("--out", bl_out, "recommendations CSV")->required();
  add_key(bl, bl_s, "--epsilon", "carot.epsilon", "CAROT entropic regularisation (default 1)");
  add_key(bl, bl_s, "--transform", "carot.transform", "IdPlus, ExpPlus, Rank or NdcgLike");
  add_key(bl, bl_s, "--alpha", "fairrec.alpha", "FairRec exposure fraction (default 1)");
  add_key(bl, bl_s, "--shuffle-seed", "fairrec.shuffle_seed", "FairRec visiting-order seed");

  // evaluate
  Settings ev_s;
  std::string ev_data, ev_recs, ev_scores, ev_out, ev_recs_out, ev_method = "base", ev_config;
  int ev_k = 10;
  auto* ev = app.add_subcommand("evaluate", "Compute ranking and exposure metrics at k");
  add_settings(ev, ev_s);
  ev->add_option("--data", ev_data, "prepared split directory")->required()->check(CLI::ExistingDirectory);
  auto* ev_recs_opt = ev->add_option("--recs", ev_recs, "recommendations CSV")->check(CLI::ExistingFile);
  auto* ev_scores_opt =
      ev->add_option("--scores", ev_scores, "checkpoint; recommends plain top-k")->check(CLI::ExistingFile);
  ev_recs_opt->excludes(ev_scores_opt);
  ev->add_option("--k", ev_k, "list length used with --scores")->check(CLI::PositiveNumber);
  ev->add_option("--out", ev_out, "metrics CSV (one row)");
  ev->add_option("--recs-out", ev_recs_out, "also write the top-k lists (with --scores)");
  ev->add_option("--method", ev_method, "method label for the metrics row");
  ev->add_option("--label", ev_config, "config label for the metrics row");

  // sweep
  Settings sw_s;
  std::string sw_out;
  int sw_parallelism = 1;
  auto* sw = app.add_subcommand("sweep", "Run a method/hyperparameter/k/seed grid");
  add_settings(sw, sw_s);
  sw->add_option("--parallelism", sw_parallelism, "worker threads")->check(CLI::PositiveNumber);
  sw->add_option("--out", sw_out, "report directory")->required();
  add_key(sw, sw_s, "--methods", "methods", "comma-separated method families");
  add_key(sw, sw_s, "--ks", "ks", "comma-separated k values");
  add_key(sw, sw_s, "--seeds", "seeds", "comma-separated seeds");
  add_key(sw, sw_s, "--data", "data.path", "CSV log or split directory (see data.source)");

  // pareto
  std::string pa_results, pa_out;
  auto* pa = app.add_subcommand("pareto", "Rebuild Pareto and scatter tables from results.csv");
  pa->add_option("--results", pa_results, "results CSV")->required()->check(CLI::ExistingFile);
  pa->add_option("--out", pa_out, "report directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prep) {
      const KeyValueConfig kv = prep_s.merged();
      SplitDays days;
      days.train = static_cast<int>(kv.get_int("train_days", days.train));
      days.validation = static_cast<int>(kv.get_int("validation_days", days.validation));
      days.test = static_cast<int>(kv.get_int("test_days", days.test));
      const int min_degree = static_cast<int>(kv.get_int("min_degree", 4));
      const FilterMode mode =
          kv.get_bool("single_pass", false) ? FilterMode::kSinglePass : FilterMode::kFixpoint;
      InteractionLog log = load_interactions(prep_in);
      if (min_degree > 0) log = filter_min_degree(log, min_degree, mode);
      const SplitDataset split = temporal_split(log, days);
      const std::string dir = output_dir(prep_out);
      save_split(split, dir);
      print_split(split);
      std::printf("wrote %s\n", dir.c_str());
    } else if (*syn) {
      const InteractionLog log = generate_synthetic(synthetic_from(syn_s.merged()));
      const std::string path = output_path(syn_out);
      save_interactions(log, path);
      std::printf("%zu interactions, %zu users, %zu items\nwrote %s\n", log.size(), log.num_users(),
                  log.num_items(), path.c_str());
    } else if (*tr) {
      const ReconConfig cfg = ReconConfig::from_kv(tr_s.merged());
      const SplitDataset data = load_split(tr_data);
      const TrainResult result = train(cfg, data);
      const std::string ckpt = output_path(tr_out);
      save_checkpoint(result.params, {cfg.seed, cfg.hash()}, ckpt);
      std::printf("trained %d epochs (selected %d), wrote %s\n",
                  static_cast<int>(result.history.epochs.size()), result.history.selected_epoch,
                  ckpt.c_str());
      if (!tr_history.empty()) {
        const std::string hist = output_path(tr_history);
        save_history_csv(result.history, hist);
        std::printf("wrote %s\n", hist.c_str());
      }
    } else if (*bl) {
      const KeyValueConfig kv = bl_s.merged();
      const SplitDataset data = load_split(bl_data);
      const Matrix scores = scores_from_checkpoint(bl_scores, data);
      const UserItemSets exclude = UserItemSets::from_log(data.train);
      RecommendationLists recs;
      if (bl_method == "carot") {
        CarotConfig cc;
        cc.epsilon = kv.get_double("carot.epsilon", cc.epsilon);
        cc.transform = parse_carot_transform(kv.get_string("carot.transform", to_string(cc.transform)));
        cc.sinkhorn_iters = static_cast<int>(kv.get_int("carot.sinkhorn_iters", cc.sinkhorn_iters));
        cc.sinkhorn_tol = kv.get_double("carot.sinkhorn_tol", cc.sinkhorn_tol);
        recs = carot(scores, cc, bl_k, &exclude);
      } else {
        FairRecConfig fc;
        fc.alpha = kv.get_double("fairrec.alpha", fc.alpha);
        fc.k = bl_k;
        if (kv.has("fairrec.shuffle_seed")) {
          fc.shuffle_seed = static_cast<std::uint64_t>(kv.get_int("fairrec.shuffle_seed", 0));
        }
        recs = fairrec(scores, fc, &exclude);
      }
      print_warnings(recs);
      const std::string path = output_path(bl_out);
      save_recommendations(recs, *data.train.users, *data.train.items, path);
      std::printf("wrote %s\n", path.c_str());
    } else if (*ev) {
      const SplitDataset data = load_split(ev_data);
      RecommendationLists recs;
      if (!ev_recs.empty()) {
        recs = load_recommendations(ev_recs, *data.train.users, *data.train.items);
      } else if (!ev_scores.empty()) {
        const UserItemSets exclude = UserItemSets::from_log(data.train);
        recs = recommend_topk(scores_from_checkpoint(ev_scores, data), ev_k, &exclude);
        if (!ev_recs_out.empty()) {
          const std::string path = output_path(ev_recs_out);
          save_recommendations(recs, *data.train.users, *data.train.items, path);
          std::printf("wrote %s\n", path.c_str());
        }
      } else {
        throw Error("evaluate: one of --recs or --scores is required");
      }
      MetricReport r = evaluate(recs, UserItemSets::from_log(data.test), data.num_items());
      r.method = ev_method;
      r.config = ev_config.empty() ? ev_method : ev_config;
      std::printf("%s\n%s\n", kMetricCsvHeader, to_csv_row(r).c_str());
      if (!ev_out.empty()) {
        const std::string path = output_path(ev_out);
        write_results_csv({r}, path);
        std::printf("wrote %s\n", path.c_str());
      }
    } else if (*sw) {
      const ExperimentGrid grid = ExperimentGrid::from_kv(sw_s.merged());
      const SweepResult result = sweep(grid, sw_parallelism);
      const std::string dir = output_dir(sw_out);
      const auto written = emit_report(result.rows, dir);
      const std::string failures = dir + "/failures.csv";
      std::ofstream f(failures);
      if (!f) throw Error("cannot write '" + failures + "'");
      f << "method,config,seed,error\n";
      for (const auto& x : result.failures) {
        std::string msg = x.error;
        for (char& c : msg) {
          if (c == ',' || c == '\n') c = ' ';
        }
        f << x.method << ',' << x.config << ',' << x.seed << ',' << msg << '\n';
        std::fprintf(stderr, "run failed: %s %s seed %llu: %s\n", x.method.c_str(),
                     x.config.c_str(), static_cast<unsigned long long>(x.seed), x.error.c_str());
      }
      std::printf("%zu result rows, %zu failed runs, %zu files in %s\n", result.rows.size(),
                  result.failures.size(), written.size() + 1, dir.c_str());
    } else if (*pa) {
      const auto rows = read_results_csv(pa_results);
      const std::string dir = output_dir(pa_out);
      const auto written = emit_report(rows, dir);
      std::printf("%zu rows, %zu files in %s\n", rows.size(), written.size(), dir.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
