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
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "recon/common.hpp"

namespace recon {

// Matching cost of a score: c(p) = -ln p. Decreasing in p.
inline double cost_fn(double p) { return -std::log(p); }

// Similarity of a score: s(p) = -ln(1 - p). Increasing in p.
inline double sim_fn(double p) { return -std::log1p(-p); }

// c(p) - s(p), the negative log-odds.
inline double recon_cost(double p) { return std::log1p(-p) - std::log(p); }

inline Matrix build_recon_cost(const Matrix& scores) {
  Matrix cost(scores.rows(), scores.cols());
  auto& dst = cost.values();
  const auto& src = scores.values();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = recon_cost(src[k]);
  return cost;
}

struct Marginals {
  std::vector<double> user;
  std::vector<double> item;

  static Marginals uniform(std::size_t num_users, std::size_t num_items) {
    if (num_users == 0 || num_items == 0) throw Error("Marginals: empty side");
    return {std::vector<double>(num_users, 1.0 / static_cast<double>(num_users)),
            std::vector<double>(num_items, 1.0 / static_cast<double>(num_items))};
  }

  void validate() const {
    auto check = [](const std::vector<double>& w, const char* side) {
      if (w.empty()) throw Error(std::string("Marginals: empty ") + side + " side");
      double total = 0.0;
      for (double x : w) {
        if (!(x > 0.0) || !std::isfinite(x)) {
          throw Error(std::string("Marginals: non-positive ") + side + " weight");
        }
        total += x;
      }
      if (std::abs(total - 1.0) > 1e-12) {
        throw Error(std::string("Marginals: ") + side + " weights do not sum to 1");
      }
    };
    check(user, "user");
    check(item, "item");
  }
};

struct SinkhornOptions {
  double epsilon = 10.0;
  int max_iters = 10;
  // Stop once both L-inf marginal residuals are <= tol. 0 runs max_iters.
  double tol = 0.0;
  // Warm-start from a geometric schedule of larger epsilons (halving from the
  // cost range down to `epsilon`). Only the final stage counts against
  // max_iters. Worth enabling for epsilon far below the cost range.
  bool epsilon_scaling = false;
};

struct TransportPlan {
  Matrix values;
  double row_residual = 0.0;
  double col_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double log_sum_exp(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) m = std::max(m, x[k]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) s += std::exp(x[k] - m);
  return m + std::log(s);
}

}  // namespace detail

// Entropic OT, min <F, D> + eps * sum f ln f subject to the marginals, solved
// by alternating row/column scaling on dual potentials in the log domain:
//   f_ui = exp((g_u + h_i - d_ui) / eps).
// After each column update the column marginals hold exactly, so the row
// residual of the current iterate drives the stopping test.
inline TransportPlan sinkhorn(const Matrix& cost, const Marginals& marginals,
                              const SinkhornOptions& opts = {}) {
  const std::size_t n_users = cost.rows();
  const std::size_t n_items = cost.cols();
  if (!(opts.epsilon > 0.0)) throw Error("sinkhorn: epsilon must be > 0");
  if (opts.max_iters < 1) throw Error("sinkhorn: max_iters must be >= 1");
  if (opts.tol < 0.0) throw Error("sinkhorn: tol must be >= 0");
  if (marginals.user.size() != n_users || marginals.item.size() != n_items) {
    throw Error("sinkhorn: marginals do not match cost shape");
  }
  for (double d : cost.values()) {
    if (!std::isfinite(d)) throw Error("sinkhorn: non-finite cost entry");
  }
  std::vector<double> log_wu(n_users), log_wi(n_items);
  for (std::size_t u = 0; u < n_users; ++u) log_wu[u] = std::log(marginals.user[u]);
  for (std::size_t i = 0; i < n_items; ++i) log_wi[i] = std::log(marginals.item[i]);

  std::vector<double> g(n_users, 0.0), h(n_items, 0.0);
  std::vector<double> row_lse(n_users), buf(n_items);
  std::vector<double> col_max(n_items), col_sum(n_items);

  // Runs up to `iters` row/column sweeps at `eps`; returns the sweep count.
  auto run = [&](double eps, int iters, double tol) {
    auto update_row_lse = [&] {
      for (std::size_t u = 0; u < n_users; ++u) {
        auto d = cost.row(u);
        for (std::size_t i = 0; i < n_items; ++i) buf[i] = (h[i] - d[i]) / eps;
        row_lse[u] = detail::log_sum_exp(buf.data(), n_items);
      }
    };
    update_row_lse();
    int done = 0;
    for (int it = 0; it < iters; ++it) {
      for (std::size_t u = 0; u < n_users; ++u) g[u] = eps * (log_wu[u] - row_lse[u]);

      std::fill(col_max.begin(), col_max.end(), -std::numeric_limits<double>::infinity());
      for (std::size_t u = 0; u < n_users; ++u) {
        auto d = cost.row(u);
        for (std::size_t i = 0; i < n_items; ++i) {
          col_max[i] = std::max(col_max[i], (g[u] - d[i]) / eps);
        }
      }
      std::fill(col_sum.begin(), col_sum.end(), 0.0);
      for (std::size_t u = 0; u < n_users; ++u) {
        auto d = cost.row(u);
        for (std::size_t i = 0; i < n_items; ++i) {
          col_sum[i] += std::exp((g[u] - d[i]) / eps - col_max[i]);
        }
      }
      for (std::size_t i = 0; i < n_items; ++i) {
        h[i] = eps * (log_wi[i] - (col_max[i] + std::log(col_sum[i])));
      }
      done = it + 1;

      update_row_lse();
      double row_res = 0.0;
      for (std::size_t u = 0; u < n_users; ++u) {
        row_res = std::max(row_res, std::abs(std::exp(g[u] / eps + row_lse[u]) -
                                             marginals.user[u]));
      }
      if (!std::isfinite(row_res)) break;
      if (tol > 0.0 && row_res <= tol) break;
    }
    return done;
  };

  const double eps = opts.epsilon;
  if (opts.epsilon_scaling) {
    const auto [lo, hi] = std::minmax_element(cost.values().begin(), cost.values().end());
    const double range = cost.size() ? *hi - *lo : 0.0;
    for (double stage = range; stage > eps; stage *= 0.5) {
      run(stage, 200, std::max(opts.tol, 1e-6));
    }
  }
  TransportPlan plan;
  plan.iterations = run(eps, opts.max_iters, opts.tol);

  for (double x : g) {
    if (!std::isfinite(x)) {
      throw Error("sinkhorn: log-domain underflow; increase epsilon");
    }
  }
  for (double x : h) {
    if (!std::isfinite(x)) {
      throw Error("sinkhorn: log-domain underflow; increase epsilon");
    }
  }

  plan.values = Matrix(n_users, n_items);
  std::vector<double> rows(n_users, 0.0), cols(n_items, 0.0);
  for (std::size_t u = 0; u < n_users; ++u) {
    auto d = cost.row(u);
    auto f = plan.values.row(u);
    for (std::size_t i = 0; i < n_items; ++i) {
      f[i] = std::exp((g[u] + h[i] - d[i]) / eps);
      rows[u] += f[i];
      cols[i] += f[i];
    }
  }
  for (std::size_t u = 0; u < n_users; ++u) {
    if (!(rows[u] > 0.0)) throw Error("sinkhorn: plan row vanished; increase epsilon");
    plan.row_residual = std::max(plan.row_residual, std::abs(rows[u] - marginals.user[u]));
  }
  for (std::size_t i = 0; i < n_items; ++i) {
    if (!(cols[i] > 0.0)) throw Error("sinkhorn: plan column vanished; increase epsilon");
    plan.col_residual = std::max(plan.col_residual, std::abs(cols[i] - marginals.item[i]));
  }
  plan.converged = opts.tol > 0.0 && plan.row_residual <= opts.tol &&
                   plan.col_residual <= opts.tol;
  return plan;
}

// sum f (d + eps ln f), with 0 ln 0 = 0.
inline double ot_value(const Matrix& plan, const Matrix& cost, double epsilon) {
  if (!plan.same_shape(cost)) throw Error("ot_value: shape mismatch");
  double total = 0.0;
  const auto& f = plan.values();
  const auto& d = cost.values();
  for (std::size_t k = 0; k < f.size(); ++k) {
    double term = f[k] * d[k];
    if (epsilon != 0.0 && f[k] > 0.0) term += epsilon * f[k] * std::log(f[k]);
    total += term;
  }
  return total;
}

// Congestion objective evaluated at a plan: entropic OT value on the
// negative log-odds cost plus sum_ui s(p_ui). With the plan optimal for
// build_recon_cost(scores) this is the quantity congestion_grad differentiates.
inline double congestion_objective(const Matrix& scores, const Matrix& plan, double epsilon) {
  double total = ot_value(plan, build_recon_cost(scores), epsilon);
  for (double p : scores.values()) total += sim_fn(p);
  return total;
}

// d/dp_ui of the congestion objective with the plan held at its optimum:
//   f c'(p) + (1 - f) s'(p) = -f/p + (1 - f)/(1 - p).
// The explicit sum of s(p) terms is already part of this expression.
inline Matrix congestion_grad(const Matrix& scores, const Matrix& plan) {
  if (!scores.same_shape(plan)) throw Error("congestion_grad: shape mismatch");
  Matrix grad(scores.rows(), scores.cols());
  const auto& p = scores.values();
  const auto& f = plan.values();
  auto& g = grad.values();
  for (std::size_t k = 0; k < p.size(); ++k) {
    g[k] = -f[k] / p[k] + (1.0 - f[k]) / (1.0 - p[k]);
  }
  return grad;
}

// Debug dump of a plan or any other matrix as headerless CSV.
inline void save_matrix_csv(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("save_matrix_csv: cannot write '" + path + "'");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << format_double(row[c]);
    }
    out << '\n';
  }
}

}  // namespace recon
