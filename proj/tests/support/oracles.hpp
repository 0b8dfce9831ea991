// SPDX-License-Identifier: Apache-2.0
// Independent reference computations used only by the tests. Nothing here
// calls into the library's numerical code.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline std::mt19937_64& rng_for(std::uint64_t seed) {
  thread_local std::mt19937_64 g;
  g.seed(seed);
  return g;
}

inline MatrixXd gaussian(Index rows, Index cols, std::mt19937_64& g) {
  std::normal_distribution<double> nd(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = nd(g);
  return m;
}

/// Random disjoint relevant/irrelevant index sets drawn from [0, n).
inline void random_labels(Index n, Index n_plus, Index n_minus, std::mt19937_64& g,
                          std::vector<Index>& rel, std::vector<Index>& irr) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), g);
  rel.assign(perm.begin(), perm.begin() + n_plus);
  irr.assign(perm.begin() + n_plus, perm.begin() + n_plus + n_minus);
}

/// (1/N+^2) sum_{i,j in +} ||y_i - y_j||^2 - beta/(N+ N-) sum_{i in +, k in -} ||y_i - y_k||^2.
inline double pda_double_sum(const MatrixXd& y, const std::vector<Index>& rel,
                             const std::vector<Index>& irr, double beta) {
  const double np = static_cast<double>(rel.size());
  const double nm = static_cast<double>(irr.size());
  double same = 0.0, cross = 0.0;
  for (Index i : rel) {
    for (Index j : rel) same += (y.col(i) - y.col(j)).squaredNorm();
    for (Index k : irr) cross += (y.col(i) - y.col(k)).squaredNorm();
  }
  return same / (np * np) - beta * cross / (np * nm);
}

inline double irrelevant_pair_sum(const MatrixXd& y, const std::vector<Index>& rel,
                                  const std::vector<Index>& irr) {
  double s = 0.0;
  for (Index i : rel)
    for (Index k : irr) s += (y.col(i) - y.col(k)).squaredNorm();
  return s;
}

/// sum_k w_k ||y_0 - y_{k+1}||^2 for a patch whose first column is the center.
inline double weighted_pairwise(const MatrixXd& yi, const VectorXd& w) {
  double s = 0.0;
  for (Index k = 0; k < w.size(); ++k) s += w(k) * (yi.col(0) - yi.col(k + 1)).squaredNorm();
  return s;
}

/// ||y - X b||^2 + lambda ||b||_1.
inline double lasso_objective(const MatrixXd& x, const VectorXd& y, const VectorXd& b, double lambda) {
  return (y - x * b).squaredNorm() + lambda * b.lpNorm<1>();
}

/**
 * Exact lasso minimizer by enumerating all 3^p sign patterns: on each support
 * with signs s, solve X_S^T X_S b = X_S^T y - (lambda/2) s and keep it when
 * the signs agree. Returns the feasible candidate with the least objective.
 */
inline VectorXd exhaustive_lasso(const MatrixXd& x, const VectorXd& y, double lambda) {
  const Index p = x.cols();
  Index patterns = 1;
  for (Index j = 0; j < p; ++j) patterns *= 3;
  VectorXd best = VectorXd::Zero(p);
  double best_obj = lasso_objective(x, y, best, lambda);
  for (Index code = 1; code < patterns; ++code) {
    std::vector<Index> support;
    std::vector<double> signs;
    Index c = code;
    for (Index j = 0; j < p; ++j) {
      const Index t = c % 3;
      c /= 3;
      if (t == 1) {
        support.push_back(j);
        signs.push_back(1.0);
      } else if (t == 2) {
        support.push_back(j);
        signs.push_back(-1.0);
      }
    }
    const Index k = static_cast<Index>(support.size());
    MatrixXd xs(x.rows(), k);
    VectorXd s(k);
    for (Index a = 0; a < k; ++a) {
      xs.col(a) = x.col(support[static_cast<std::size_t>(a)]);
      s(a) = signs[static_cast<std::size_t>(a)];
    }
    const MatrixXd g = xs.transpose() * xs;
    Eigen::FullPivLU<MatrixXd> lu(g);
    if (lu.rank() < k) continue;
    const VectorXd bs = lu.solve(xs.transpose() * y - 0.5 * lambda * s);
    bool consistent = true;
    for (Index a = 0; a < k; ++a) consistent = consistent && bs(a) * s(a) > 0.0;
    if (!consistent) continue;
    VectorXd b = VectorXd::Zero(p);
    for (Index a = 0; a < k; ++a) b(support[static_cast<std::size_t>(a)]) = bs(a);
    const double obj = lasso_objective(x, y, b, lambda);
    if (obj < best_obj) {
      best_obj = obj;
      best = b;
    }
  }
  return best;
}

/// Largest KKT violation of b for ||y - X b||^2 + lambda ||b||_1, with
/// gradient correlations c = 2 X^T (y - X b): |c_j - lambda sign(b_j)| on the
/// support and max(0, |c_j| - lambda) off it.
inline double kkt_violation(const MatrixXd& x, const VectorXd& y, const VectorXd& b, double lambda) {
  const VectorXd c = 2.0 * x.transpose() * (y - x * b);
  double worst = 0.0;
  for (Index j = 0; j < b.size(); ++j) {
    if (b(j) != 0.0) {
      worst = std::max(worst, std::abs(c(j) - lambda * (b(j) > 0 ? 1.0 : -1.0)));
    } else {
      worst = std::max(worst, std::abs(c(j)) - lambda);
    }
  }
  return worst;
}

inline VectorXd least_squares(const MatrixXd& x, const VectorXd& y) {
  return x.colPivHouseholderQr().solve(y);
}

/// Central differences of f at u.
template <class F>
VectorXd finite_gradient(F&& f, const VectorXd& u, double h = 1e-5) {
  VectorXd g(u.size());
  for (Index j = 0; j < u.size(); ++j) {
    VectorXd up = u, dn = u;
    up(j) += h;
    dn(j) -= h;
    g(j) = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

/// AP straight from the definition: mean over relevant ranks r of precision@r.
inline double ap_from_definition(const std::vector<int>& rel) {
  std::vector<double> precisions;
  for (std::size_t r = 0; r < rel.size(); ++r) {
    if (!rel[r]) continue;
    double hits = 0;
    for (std::size_t t = 0; t <= r; ++t) hits += rel[t] ? 1 : 0;
    precisions.push_back(hits / static_cast<double>(r + 1));
  }
  if (precisions.empty()) return 0.0;
  double s = 0.0;
  for (double p : precisions) s += p;
  return s / static_cast<double>(precisions.size());
}

/// Naive triple loop U^T X.
inline MatrixXd naive_project(const MatrixXd& u, const MatrixXd& x) {
  MatrixXd y = MatrixXd::Zero(u.cols(), x.cols());
  for (Index i = 0; i < u.cols(); ++i)
    for (Index j = 0; j < x.cols(); ++j)
      for (Index k = 0; k < x.rows(); ++k) y(i, j) += u(k, i) * x(k, j);
  return y;
}

}  // namespace oracle
