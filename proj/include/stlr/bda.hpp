// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include "stlr/dataset.hpp"

/// Biased discriminant analysis baseline and the scatter/pairwise identities
/// relating it to the pair-wise objective.
namespace stlr::bda {

struct ScatterPair {
  Eigen::MatrixXd s_plus;   // sum over relevant of (x_i - m+)(x_i - m+)^T
  Eigen::MatrixXd s_minus;  // sum over irrelevant of (x_i - m+)(x_i - m+)^T
  Eigen::VectorXd m_plus;   // relevant mean
};

/// `x` is m x N; labels index its columns. Only N+ >= 1 is required.
ScatterPair scatter_matrices(const Eigen::MatrixXd& x, const LabelSet& labels);

struct BdaSubspace {
  Eigen::MatrixXd u;        // m x d, unit-norm columns
  Eigen::VectorXd eigvals;  // generalized eigenvalues, descending
  bool degenerate = false;  // S- = 0: columns are S+ eigenvectors, ascending
};

/// Ratio-trace relaxation: top-d eigenvectors of (S+ + ridge I)^{-1} S-,
/// computed through the Cholesky factor of S+ + ridge I. Throws
/// NumericalError when that matrix is not definite (raise the ridge).
BdaSubspace bda_subspace(const Eigen::MatrixXd& x, const LabelSet& labels, Index d, double ridge);

/**
 * Both sides of the expansions of the BDA scatters in terms of pairwise
 * differences of the embedded points:
 *   lhs_minus = sum_{i in -} ||y_i - m+||^2
 *   rhs_minus = (1/N+^2) sum_{i in -} [ sum_{j in +} ||y_i - y_j||^2
 *                                       + sum_{m != n in +} (y_i - y_m)^T (y_i - y_n) ]
 * and likewise over i in + for the plus pair. The pairwise and cross parts of
 * each right side are reported separately (already divided by N+^2).
 */
struct CrossTermExpansion {
  double lhs_minus = 0.0;
  double rhs_minus = 0.0;
  double lhs_plus = 0.0;
  double rhs_plus = 0.0;
  double pairwise_minus = 0.0;
  double cross_minus = 0.0;
  double pairwise_plus = 0.0;
  double cross_plus = 0.0;
};

CrossTermExpansion verify_cross_term_expansion(const Eigen::MatrixXd& y, const LabelSet& labels);

}  // namespace stlr::bda
