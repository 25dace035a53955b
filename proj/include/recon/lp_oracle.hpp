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

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "recon/common.hpp"
#include "recon/ot_sinkhorn.hpp"

namespace recon {

// Exact solution of the unregularized transport LP. Test oracle for small
// instances only.
struct LpSolution {
  Matrix plan;
  double objective = 0.0;
};

inline constexpr std::size_t kLpOracleMaxCells = 400;

namespace detail {

// Dense two-phase simplex for min c'x s.t. Ax = b, x >= 0, b >= 0, using
// Bland's rule so degenerate transport vertices cannot cycle.
class DenseSimplex {
 public:
  DenseSimplex(std::vector<std::vector<double>> a, std::vector<double> b,
               std::vector<double> c)
      : m_(a.size()), n_(c.size()), cost_(std::move(c)) {
    // Tableau columns: n structural, m artificial, then rhs.
    tab_.assign(m_, std::vector<double>(n_ + m_ + 1, 0.0));
    basis_.resize(m_);
    for (std::size_t r = 0; r < m_; ++r) {
      for (std::size_t j = 0; j < n_; ++j) tab_[r][j] = a[r][j];
      tab_[r][n_ + r] = 1.0;
      tab_[r][n_ + m_] = b[r];
      basis_[r] = n_ + r;
    }
  }

  std::vector<double> solve() {
    // Phase 1: minimize the sum of artificials.
    std::vector<double> phase1(n_ + m_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) phase1[n_ + r] = 1.0;
    run(phase1, n_ + m_);
    double infeasibility = 0.0;
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] >= n_) infeasibility += tab_[r][n_ + m_];
    }
    if (infeasibility > 1e-9) throw Error("lp_oracle: infeasible problem");

    // Drive zero-level artificials out of the basis; a row with no usable
    // pivot is redundant (transport constraints have rank m - 1).
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < n_) continue;
      for (std::size_t j = 0; j < n_; ++j) {
        if (std::abs(tab_[r][j]) > kPivotTol) {
          pivot(r, j);
          break;
        }
      }
    }
    // Phase 2 over structural columns only.
    std::vector<double> phase2(n_ + m_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) phase2[j] = cost_[j];
    run(phase2, n_);

    std::vector<double> x(n_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < n_) x[basis_[r]] = tab_[r][n_ + m_];
    }
    return x;
  }

 private:
  static constexpr double kPivotTol = 1e-12;

  void pivot(std::size_t row, std::size_t col) {
    const double pv = tab_[row][col];
    for (double& v : tab_[row]) v /= pv;
    for (std::size_t r = 0; r < m_; ++r) {
      if (r == row) continue;
      const double factor = tab_[r][col];
      if (factor == 0.0) continue;
      for (std::size_t j = 0; j <= n_ + m_; ++j) tab_[r][j] -= factor * tab_[row][j];
    }
    basis_[row] = col;
  }

  // Minimizes obj over the first `allowed` columns from the current basis.
  void run(const std::vector<double>& obj, std::size_t allowed) {
    for (std::size_t guard = 0; guard < 100000; ++guard) {
      std::size_t entering = allowed;
      for (std::size_t j = 0; j < allowed; ++j) {
        double reduced = obj[j];
        for (std::size_t r = 0; r < m_; ++r) reduced -= obj[basis_[r]] * tab_[r][j];
        if (reduced < -1e-11) {
          entering = j;
          break;
        }
      }
      if (entering == allowed) return;
      std::size_t leaving = m_;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m_; ++r) {
        if (tab_[r][entering] > kPivotTol) {
          const double ratio = tab_[r][n_ + m_] / tab_[r][entering];
          if (ratio < best - 1e-15 ||
              (std::abs(ratio - best) <= 1e-15 && leaving < m_ &&
               basis_[r] < basis_[leaving])) {
            best = ratio;
            leaving = r;
          }
        }
      }
      if (leaving == m_) throw Error("lp_oracle: unbounded problem");
      pivot(leaving, entering);
    }
    throw Error("lp_oracle: iteration limit reached");
  }

  std::size_t m_, n_;
  std::vector<double> cost_;
  std::vector<std::vector<double>> tab_;
  std::vector<std::size_t> basis_;
};

}  // namespace detail

inline LpSolution lp_oracle(const Matrix& cost, const Marginals& marginals) {
  const std::size_t n_users = cost.rows();
  const std::size_t n_items = cost.cols();
  if (n_users * n_items > kLpOracleMaxCells) {
    throw Error("lp_oracle: problem exceeds the oracle size limit");
  }
  if (marginals.user.size() != n_users || marginals.item.size() != n_items) {
    throw Error("lp_oracle: marginals do not match cost shape");
  }
  const std::size_t n = n_users * n_items;
  std::vector<std::vector<double>> a(n_users + n_items, std::vector<double>(n, 0.0));
  std::vector<double> b(n_users + n_items);
  for (std::size_t u = 0; u < n_users; ++u) {
    for (std::size_t i = 0; i < n_items; ++i) {
      a[u][u * n_items + i] = 1.0;
      a[n_users + i][u * n_items + i] = 1.0;
    }
    b[u] = marginals.user[u];
  }
  for (std::size_t i = 0; i < n_items; ++i) b[n_users + i] = marginals.item[i];

  detail::DenseSimplex simplex(std::move(a), std::move(b), cost.values());
  const auto x = simplex.solve();
  LpSolution out{Matrix(n_users, n_items), 0.0};
  for (std::size_t k = 0; k < n; ++k) {
    out.plan.values()[k] = x[k];
    out.objective += x[k] * cost.values()[k];
  }
  return out;
}

}  // namespace recon
