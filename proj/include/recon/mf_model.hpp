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
#include <cstdio>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "recon/common.hpp"
#include "recon/dataset.hpp"

namespace recon {

// Scores are clamped to [kScoreClamp, 1 - kScoreClamp] so that -ln(p) and
// -ln(1 - p) stay finite.
inline constexpr double kScoreClamp = 1e-6;

// Logistic matrix factorization: p_ui = sigmoid(x_u . y_i + b_u + b_i + b0).
struct ModelParams {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t dim = 0;
  std::vector<double> user_embeddings;  // num_users x dim, row-major
  std::vector<double> item_embeddings;  // num_items x dim, row-major
  std::vector<double> user_bias;
  std::vector<double> item_bias;
  double global_bias = 0.0;

  static ModelParams zeros(std::size_t users, std::size_t items, std::size_t dim) {
    ModelParams p;
    p.num_users = users;
    p.num_items = items;
    p.dim = dim;
    p.user_embeddings.assign(users * dim, 0.0);
    p.item_embeddings.assign(items * dim, 0.0);
    p.user_bias.assign(users, 0.0);
    p.item_bias.assign(items, 0.0);
    return p;
  }
  static ModelParams zeros_like(const ModelParams& other) {
    return zeros(other.num_users, other.num_items, other.dim);
  }

  std::span<double> user_row(std::size_t u) { return {user_embeddings.data() + u * dim, dim}; }
  std::span<const double> user_row(std::size_t u) const {
    return {user_embeddings.data() + u * dim, dim};
  }
  std::span<double> item_row(std::size_t i) { return {item_embeddings.data() + i * dim, dim}; }
  std::span<const double> item_row(std::size_t i) const {
    return {item_embeddings.data() + i * dim, dim};
  }

  bool all_finite() const {
    auto finite = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return finite(user_embeddings) && finite(item_embeddings) && finite(user_bias) &&
           finite(item_bias) && std::isfinite(global_bias);
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

using Rng = std::mt19937_64;

inline ModelParams init_params(std::size_t num_users, std::size_t num_items,
                               std::size_t dim, std::uint64_t seed, double init_scale) {
  if (dim < 1) throw Error("init_params: dim must be >= 1");
  if (init_scale < 0) throw Error("init_params: init_scale must be >= 0");
  ModelParams p = ModelParams::zeros(num_users, num_items, dim);
  if (init_scale == 0.0) return p;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, init_scale);
  for (auto& v : p.user_embeddings) v = normal(rng);
  for (auto& v : p.item_embeddings) v = normal(rng);
  return p;
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double clamp_score(double p) {
  return std::clamp(p, kScoreClamp, 1.0 - kScoreClamp);
}

inline double logit(const ModelParams& params, std::size_t u, std::size_t i) {
  auto x = params.user_row(u);
  auto y = params.item_row(i);
  double z = params.user_bias[u] + params.item_bias[i] + params.global_bias;
  for (std::size_t k = 0; k < params.dim; ++k) z += x[k] * y[k];
  return z;
}

inline double score(const ModelParams& params, std::size_t u, std::size_t i) {
  if (u >= params.num_users || i >= params.num_items) {
    throw Error("score: index out of range");
  }
  return clamp_score(sigmoid(logit(params, u, i)));
}

inline Matrix score_matrix(const ModelParams& params) {
  Matrix out(params.num_users, params.num_items);
  for (std::size_t u = 0; u < params.num_users; ++u) {
    auto row = out.row(u);
    for (std::size_t i = 0; i < params.num_items; ++i) {
      row[i] = clamp_score(sigmoid(logit(params, u, i)));
    }
  }
  return out;
}

struct TrainBatch {
  std::vector<std::pair<int, int>> positives;
  std::vector<std::pair<int, int>> negatives;

  bool empty() const { return positives.empty() && negatives.empty(); }
};

struct LossAndGrad {
  double loss = 0.0;
  ModelParams grad;
};

// Adds `dlogit` times d(logit_ui)/d(params) into `grad`.
inline void accumulate_logit_grad(const ModelParams& params, std::size_t u, std::size_t i,
                                  double dlogit, ModelParams& grad) {
  auto x = params.user_row(u);
  auto y = params.item_row(i);
  auto gx = grad.user_row(u);
  auto gy = grad.item_row(i);
  for (std::size_t k = 0; k < params.dim; ++k) {
    gx[k] += dlogit * y[k];
    gy[k] += dlogit * x[k];
  }
  grad.user_bias[u] += dlogit;
  grad.item_bias[i] += dlogit;
  grad.global_bias += dlogit;
}

// Negative log-likelihood of the batch plus l2_weight * ||embeddings||^2.
// Inside the clamp region the score is constant, so its gradient is zero there.
inline LossAndGrad base_loss_and_grad(const ModelParams& params, const TrainBatch& batch,
                                      double l2_weight = 0.0) {
  if (batch.empty()) throw Error("base_loss_and_grad: empty batch");
  LossAndGrad out{0.0, ModelParams::zeros_like(params)};
  auto term = [&](int u, int i, bool positive) {
    if (u < 0 || i < 0 || static_cast<std::size_t>(u) >= params.num_users ||
        static_cast<std::size_t>(i) >= params.num_items) {
      throw Error("base_loss_and_grad: pair index out of range");
    }
    const double raw = sigmoid(logit(params, u, i));
    const double p = clamp_score(raw);
    const bool clamped = raw != p;
    if (positive) {
      out.loss -= std::log(p);
      if (!clamped) accumulate_logit_grad(params, u, i, raw - 1.0, out.grad);
    } else {
      out.loss -= std::log1p(-p);
      if (!clamped) accumulate_logit_grad(params, u, i, raw, out.grad);
    }
  };
  for (auto [u, i] : batch.positives) term(u, i, true);
  for (auto [u, i] : batch.negatives) term(u, i, false);
  if (l2_weight != 0.0) {
    for (std::size_t k = 0; k < params.user_embeddings.size(); ++k) {
      const double v = params.user_embeddings[k];
      out.loss += l2_weight * v * v;
      out.grad.user_embeddings[k] += 2.0 * l2_weight * v;
    }
    for (std::size_t k = 0; k < params.item_embeddings.size(); ++k) {
      const double v = params.item_embeddings[k];
      out.loss += l2_weight * v * v;
      out.grad.item_embeddings[k] += 2.0 * l2_weight * v;
    }
  }
  return out;
}

// params -= step * grad
inline void apply_gradient(ModelParams& params, const ModelParams& grad, double step) {
  auto axpy = [step](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] -= step * src[k];
  };
  axpy(params.user_embeddings, grad.user_embeddings);
  axpy(params.item_embeddings, grad.item_embeddings);
  axpy(params.user_bias, grad.user_bias);
  axpy(params.item_bias, grad.item_bias);
  params.global_bias -= step * grad.global_bias;
}

// Uniform draws, with replacement, from the items `user` has not interacted
// with. Returns an empty list when the user has interacted with everything.
inline std::vector<int> sample_negatives(const UserItemSets& train, int user, int count,
                                         Rng& rng) {
  const auto& seen = train.items_of(user);
  const std::size_t available = train.num_items() - seen.size();
  std::vector<int> out;
  if (available == 0 || count <= 0) return out;
  std::uniform_int_distribution<std::size_t> pick(0, available - 1);
  out.reserve(static_cast<std::size_t>(count));
  for (int c = 0; c < count; ++c) {
    // Map the r-th unseen slot to an item id by skipping seen ids.
    int item = static_cast<int>(pick(rng));
    for (int s : seen) {
      if (s <= item) {
        ++item;
      } else {
        break;
      }
    }
    out.push_back(item);
  }
  return out;
}

inline std::vector<int> sample_negatives(const UserItemSets& train, int user, int count,
                                         std::uint64_t seed) {
  Rng rng(seed);
  return sample_negatives(train, user, count, rng);
}

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

// Text checkpoint, one value per token, shortest round-trip decimals:
//   recon-checkpoint v1
//   num_users <U>
//   num_items <I>
//   dim <d>
//   seed <seed>
//   config_hash <16 hex digits>
//   global_bias <b0>
//   U lines: user <u> <bias> <e_0> ... <e_{d-1}>
//   I lines: item <i> <bias> <e_0> ... <e_{d-1}>
inline void save_checkpoint(const ModelParams& params, const CheckpointMeta& meta,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_checkpoint: cannot write '" + path + "'");
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(meta.config_hash));
  out << "recon-checkpoint v1\n"
      << "num_users " << params.num_users << '\n'
      << "num_items " << params.num_items << '\n'
      << "dim " << params.dim << '\n'
      << "seed " << meta.seed << '\n'
      << "config_hash " << hash << '\n'
      << "global_bias " << format_double(params.global_bias) << '\n';
  for (std::size_t u = 0; u < params.num_users; ++u) {
    out << "user " << u << ' ' << format_double(params.user_bias[u]);
    for (double v : params.user_row(u)) out << ' ' << format_double(v);
    out << '\n';
  }
  for (std::size_t i = 0; i < params.num_items; ++i) {
    out << "item " << i << ' ' << format_double(params.item_bias[i]);
    for (double v : params.item_row(i)) out << ' ' << format_double(v);
    out << '\n';
  }
  if (!out) throw Error("save_checkpoint: write failed for '" + path + "'");
}

inline ModelParams load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error("load_checkpoint: cannot open '" + path + "'");
  auto fail = [&](const std::string& what) {
    throw Error("load_checkpoint: " + path + ": " + what);
  };
  std::string magic, version;
  in >> magic >> version;
  if (magic != "recon-checkpoint" || version != "v1") fail("bad magic");

  auto read_key = [&](const char* key) {
    std::string k, v;
    in >> k >> v;
    if (k != key) fail(std::string("expected '") + key + "'");
    return v;
  };
  auto read_double = [&](std::istream& is) {
    std::string tok;
    is >> tok;
    double v = 0;
    if (!parse_double(tok, v)) fail("bad number '" + tok + "'");
    return v;
  };
  const std::size_t users = std::stoull(read_key("num_users"));
  const std::size_t items = std::stoull(read_key("num_items"));
  const std::size_t dim = std::stoull(read_key("dim"));
  const std::uint64_t seed = std::stoull(read_key("seed"));
  const std::uint64_t hash = std::stoull(read_key("config_hash"), nullptr, 16);
  ModelParams p = ModelParams::zeros(users, items, dim);
  {
    std::string k;
    in >> k;
    if (k != "global_bias") fail("expected 'global_bias'");
    p.global_bias = read_double(in);
  }
  auto read_rows = [&](const char* tag, std::size_t n, std::vector<double>& bias,
                       auto row_of) {
    for (std::size_t r = 0; r < n; ++r) {
      std::string t;
      std::size_t idx = 0;
      in >> t >> idx;
      if (t != tag || idx != r) fail(std::string("bad ") + tag + " row " + std::to_string(r));
      bias[r] = read_double(in);
      for (double& v : row_of(r)) v = read_double(in);
    }
  };
  read_rows("user", users, p.user_bias, [&](std::size_t r) { return p.user_row(r); });
  read_rows("item", items, p.item_bias, [&](std::size_t r) { return p.item_row(r); });
  if (!in) fail("truncated file");
  if (meta) *meta = {seed, hash};
  return p;
}

}  // namespace recon
