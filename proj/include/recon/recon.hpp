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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "recon/common.hpp"
#include "recon/config.hpp"
#include "recon/dataset.hpp"
#include "recon/metrics.hpp"
#include "recon/mf_model.hpp"
#include "recon/ot_sinkhorn.hpp"
#include "recon/topk.hpp"

namespace recon {

// Hyperparameters of the congestion-aware trainer. lambda = 0 trains the
// plain base model.
struct ReconConfig {
  double lambda = 0.0;
  double epsilon = 10.0;
  int sinkhorn_iters = 10;
  // > 0 switches the solver to tolerance-driven stopping (sinkhorn_iters
  // becomes the cap).
  double sinkhorn_tol = 0.0;
  int epochs = 30;
  double learning_rate = 0.5;
  int batch_size = 256;
  int negatives_per_positive = 5;
  int embedding_dim = 32;
  double l2_weight = 1e-3;
  double init_scale = 0.1;
  std::uint64_t seed = 1;
  int ot_refresh_every = 1;
  // Validation-based early stopping on NDCG@validation_k; 0 disables it.
  int patience = 0;
  int validation_k = 10;

  void validate() const {
    if (lambda < 0) throw Error("ReconConfig: lambda must be >= 0");
    if (!(epsilon > 0)) throw Error("ReconConfig: epsilon must be > 0");
    if (sinkhorn_iters < 1) throw Error("ReconConfig: sinkhorn_iters must be >= 1");
    if (sinkhorn_tol < 0) throw Error("ReconConfig: sinkhorn_tol must be >= 0");
    if (epochs < 1) throw Error("ReconConfig: epochs must be >= 1");
    if (!(learning_rate > 0)) throw Error("ReconConfig: learning_rate must be > 0");
    if (batch_size < 1) throw Error("ReconConfig: batch_size must be >= 1");
    if (negatives_per_positive < 0) {
      throw Error("ReconConfig: negatives_per_positive must be >= 0");
    }
    if (embedding_dim < 1) throw Error("ReconConfig: embedding_dim must be >= 1");
    if (l2_weight < 0) throw Error("ReconConfig: l2_weight must be >= 0");
    if (init_scale < 0) throw Error("ReconConfig: init_scale must be >= 0");
    if (ot_refresh_every < 1) throw Error("ReconConfig: ot_refresh_every must be >= 1");
    if (patience < 0) throw Error("ReconConfig: patience must be >= 0");
    if (validation_k < 1) throw Error("ReconConfig: validation_k must be >= 1");
  }

  static ReconConfig from_kv(const KeyValueConfig& kv) { return from_kv(kv, ReconConfig()); }

  static ReconConfig from_kv(const KeyValueConfig& kv, const ReconConfig& base) {
    ReconConfig c = base;
    c.lambda = kv.get_double("lambda", c.lambda);
    c.epsilon = kv.get_double("epsilon", c.epsilon);
    c.sinkhorn_iters = static_cast<int>(kv.get_int("sinkhorn_iters", c.sinkhorn_iters));
    c.sinkhorn_tol = kv.get_double("sinkhorn_tol", c.sinkhorn_tol);
    c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
    c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
    c.batch_size = static_cast<int>(kv.get_int("batch_size", c.batch_size));
    c.negatives_per_positive =
        static_cast<int>(kv.get_int("negatives_per_positive", c.negatives_per_positive));
    c.embedding_dim = static_cast<int>(kv.get_int("embedding_dim", c.embedding_dim));
    c.l2_weight = kv.get_double("l2_weight", c.l2_weight);
    c.init_scale = kv.get_double("init_scale", c.init_scale);
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
    c.ot_refresh_every = static_cast<int>(kv.get_int("ot_refresh_every", c.ot_refresh_every));
    c.patience = static_cast<int>(kv.get_int("patience", c.patience));
    c.validation_k = static_cast<int>(kv.get_int("validation_k", c.validation_k));
    c.validate();
    return c;
  }

  KeyValueConfig to_kv() const {
    KeyValueConfig kv;
    kv.set("lambda", format_double(lambda));
    kv.set("epsilon", format_double(epsilon));
    kv.set("sinkhorn_iters", std::to_string(sinkhorn_iters));
    kv.set("sinkhorn_tol", format_double(sinkhorn_tol));
    kv.set("epochs", std::to_string(epochs));
    kv.set("learning_rate", format_double(learning_rate));
    kv.set("batch_size", std::to_string(batch_size));
    kv.set("negatives_per_positive", std::to_string(negatives_per_positive));
    kv.set("embedding_dim", std::to_string(embedding_dim));
    kv.set("l2_weight", format_double(l2_weight));
    kv.set("init_scale", format_double(init_scale));
    kv.set("seed", std::to_string(seed));
    kv.set("ot_refresh_every", std::to_string(ot_refresh_every));
    kv.set("patience", std::to_string(patience));
    kv.set("validation_k", std::to_string(validation_k));
    return kv;
  }

  std::uint64_t hash() const { return fnv1a64(to_kv().to_string()); }
};

struct EpochRecord {
  int epoch = 0;
  double base_loss = 0.0;
  // OT fields are NaN on epochs without a transport refresh.
  double ot_value = 0.0;
  double congestion_objective = 0.0;
  double combined = 0.0;
  double row_residual = 0.0;
  double col_residual = 0.0;
  double validation_ndcg = 0.0;
  double wall_seconds = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  // Epoch (1-based) whose parameters were returned.
  int selected_epoch = 0;
};

inline constexpr const char* kHistoryCsvHeader =
    "epoch,base_loss,ot_value,congestion_objective,combined,row_residual,col_residual,"
    "validation_ndcg,wall_seconds";

inline void save_history_csv(const TrainingHistory& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_history_csv: cannot write '" + path + "'");
  out << kHistoryCsvHeader << '\n';
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << format_double(e.base_loss) << ',' << format_double(e.ot_value)
        << ',' << format_double(e.congestion_objective) << ',' << format_double(e.combined)
        << ',' << format_double(e.row_residual) << ',' << format_double(e.col_residual) << ','
        << format_double(e.validation_ndcg) << ',' << format_double(e.wall_seconds) << '\n';
  }
}

struct TrainResult {
  ModelParams params;
  TrainingHistory history;
};

// Backpropagates a dO/dP matrix through the logistic parametrization.
// Entries where the score sits in the clamp region contribute nothing.
inline ModelParams score_grad_to_params(const ModelParams& params, const Matrix& dscores) {
  ModelParams grad = ModelParams::zeros_like(params);
  for (std::size_t u = 0; u < params.num_users; ++u) {
    for (std::size_t i = 0; i < params.num_items; ++i) {
      const double raw = sigmoid(logit(params, u, i));
      if (raw != clamp_score(raw)) continue;
      accumulate_logit_grad(params, u, i, dscores(u, i) * raw * (1.0 - raw), grad);
    }
  }
  return grad;
}

namespace detail {

inline std::vector<std::pair<int, int>> positive_pairs(const UserItemSets& sets) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t u = 0; u < sets.num_users(); ++u) {
    for (int i : sets.items_of(static_cast<int>(u))) out.emplace_back(static_cast<int>(u), i);
  }
  return out;
}

// One pass of minibatch SGD on the mean per-pair base loss. Returns the
// summed batch loss.
inline double base_epoch(const ReconConfig& cfg, const UserItemSets& train_sets,
                         std::vector<std::pair<int, int>>& positives, ModelParams& params,
                         Rng& rng) {
  std::shuffle(positives.begin(), positives.end(), rng);
  double epoch_loss = 0.0;
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t start = 0; start < positives.size(); start += bs) {
    const std::size_t end = std::min(positives.size(), start + bs);
    TrainBatch batch;
    batch.positives.assign(positives.begin() + static_cast<std::ptrdiff_t>(start),
                           positives.begin() + static_cast<std::ptrdiff_t>(end));
    for (auto [u, i] : batch.positives) {
      for (int j : sample_negatives(train_sets, u, cfg.negatives_per_positive, rng)) {
        batch.negatives.emplace_back(u, j);
      }
    }
    LossAndGrad lg = base_loss_and_grad(params, batch, cfg.l2_weight);
    if (!std::isfinite(lg.loss)) {
      throw Error("train: non-finite base loss; lower learning_rate (currently " +
                  format_double(cfg.learning_rate) + ")");
    }
    epoch_loss += lg.loss;
    const double pairs = static_cast<double>(batch.positives.size() + batch.negatives.size());
    apply_gradient(params, lg.grad, cfg.learning_rate / pairs);
  }
  if (!params.all_finite()) {
    throw Error("train: parameters diverged; lower learning_rate (currently " +
                format_double(cfg.learning_rate) + ")");
  }
  return epoch_loss;
}

inline TrainResult train_loop(const ReconConfig& cfg, const SplitDataset& data, bool with_ot) {
  cfg.validate();
  if (data.train.empty()) throw Error("train: train split is empty");
  const std::size_t n_users = data.num_users();
  const std::size_t n_items = data.num_items();
  const UserItemSets train_sets = UserItemSets::from_log(data.train);
  const UserItemSets val_sets = UserItemSets::from_log(data.validation);
  auto positives = positive_pairs(train_sets);

  TrainResult result;
  result.params = init_params(n_users, n_items, static_cast<std::size_t>(cfg.embedding_dim),
                              cfg.seed, cfg.init_scale);
  // Separate stream so init and batch order are independent knobs.
  Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  const Marginals marginals = Marginals::uniform(n_users, n_items);
  const SinkhornOptions sk{cfg.epsilon, cfg.sinkhorn_iters, cfg.sinkhorn_tol};
  const bool early_stopping = cfg.patience > 0 && !data.validation.empty();

  ModelParams best = result.params;
  double best_ndcg = -1.0;
  int since_best = 0;
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.base_loss = base_epoch(cfg, train_sets, positives, result.params, rng);
    rec.ot_value = rec.congestion_objective = rec.row_residual = rec.col_residual = kNaN;
    rec.combined = rec.base_loss;

    if (with_ot && epoch % cfg.ot_refresh_every == 0) {
      const Matrix scores = score_matrix(result.params);
      const Matrix cost = build_recon_cost(scores);
      const TransportPlan plan = sinkhorn(cost, marginals, sk);
      rec.ot_value = ot_value(plan.values, cost, cfg.epsilon);
      rec.congestion_objective = congestion_objective(scores, plan.values, cfg.epsilon);
      rec.combined = rec.base_loss + cfg.lambda * rec.congestion_objective;
      rec.row_residual = plan.row_residual;
      rec.col_residual = plan.col_residual;
      if (cfg.lambda > 0.0) {
        const ModelParams grad =
            score_grad_to_params(result.params, congestion_grad(scores, plan.values));
        apply_gradient(result.params, grad, cfg.learning_rate * cfg.lambda);
        if (!result.params.all_finite()) {
          throw Error("train: congestion step diverged; lower learning_rate or lambda");
        }
      }
    }

    rec.validation_ndcg = kNaN;
    if (early_stopping) {
      const auto recs = recommend_topk(score_matrix(result.params), cfg.validation_k, &train_sets);
      rec.validation_ndcg = ndcg_at_k(recs, val_sets).value_or(0.0);
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(rec);

    if (early_stopping) {
      if (rec.validation_ndcg > best_ndcg) {
        best_ndcg = rec.validation_ndcg;
        best = result.params;
        result.history.selected_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    } else {
      result.history.selected_epoch = epoch;
    }
  }
  if (early_stopping) result.params = std::move(best);
  return result;
}

}  // namespace detail

// Joint training: each epoch runs minibatch SGD on the base loss, then every
// ot_refresh_every epochs solves entropic OT on the full score matrix and
// takes one step of lambda * congestion_grad through the parametrization.
inline TrainResult train(const ReconConfig& cfg, const SplitDataset& data) {
  return detail::train_loop(cfg, data, /*with_ot=*/true);
}

// The same loop without any transport computation.
inline TrainResult train_base(const ReconConfig& cfg, const SplitDataset& data) {
  return detail::train_loop(cfg, data, /*with_ot=*/false);
}

}  // namespace recon
