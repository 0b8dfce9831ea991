// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <Eigen/Core>

#include "stlr/dataset.hpp"
#include "stlr/lars.hpp"
#include "stlr/pca.hpp"
#include "stlr/pda.hpp"

/**
 * Sparse transfer learning: fit Y = U^T X to the PCA scores M while
 * minimizing alpha' tr(Y L Y^T) under an elastic-net penalty on U,
 *
 *   ||M - U^T X||^2 + alpha' tr(U^T X L X^T U) + lambda1 ||U||_1 + lambda2 ||U||^2,
 *
 * rewritten as d independent lasso problems on an augmented design and
 * solved column by column with LARS.
 */
namespace stlr::stl {

struct StlConfig {
  double alpha = 0.0;
  double beta = 1.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  Index d = 1;
  Index k = 1;  // per-column sparsity bound

  void validate() const;
  /// alpha' = alpha * N / (N+ * N+).
  double alpha_prime(Index n, Index n_plus) const;
};

/// N x N symmetric matrix equal to the identity outside `support`.
struct BlockedSymmetric {
  Index n = 0;
  std::vector<Index> support;
  Eigen::MatrixXd block;

  Eigen::MatrixXd dense() const;
};

/// A = alpha' L + I. Throws NotPositiveDefinite when min eig(A) <= 1e-10;
/// the exception carries the largest admissible alpha' (bisection).
BlockedSymmetric assemble_a(const pda::AlignedLaplacian& l, double alpha_prime);

/// Largest alpha' in [0, upper] keeping alpha' L + I definite, by bisection.
double max_admissible_alpha_prime(const pda::AlignedLaplacian& l, double upper);

/**
 * Eigendecomposition of a BlockedSymmetric: only the labeled block is
 * decomposed. V is the identity except V[support[a], support[b]] =
 * block_vectors(a, b), and coordinate p carries eigenvalue eigenvalues()(p).
 */
struct BlockEigen {
  Index n = 0;
  std::vector<Index> support;
  Eigen::MatrixXd block_vectors;
  Eigen::VectorXd block_values;

  Index decomposed_dim() const noexcept { return block_values.size(); }
  Eigen::VectorXd eigenvalues() const;
  Eigen::MatrixXd vectors() const;
  /// V^T z for an N x k matrix z.
  Eigen::MatrixXd apply_transpose(const Eigen::MatrixXd& z) const;
  /// V z for an N x k matrix z.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& z) const;
};

BlockEigen eigendecompose_blocked(const BlockedSymmetric& a);
/// Dense input; throws ContractError if anything outside the support block
/// differs from the identity.
BlockEigen eigendecompose_blocked(const Eigen::MatrixXd& a, const std::vector<Index>& support);

/**
 * Augmented lasso problem
 *   M* = [D^{-1/2} V^T M^T ; 0],  X* = (1+lambda2)^{-1/2} [D^{1/2} V^T X^T ; sqrt(lambda2) I],
 * with U* = sqrt(1+lambda2) U. `lambda` is the l1 weight that makes
 *   ||M* - X* U*||^2 + lambda ||U*||_1
 * equal the smooth trace objective plus lambda1 ||U||_1 + lambda2 ||U||^2 plus
 * const_term = tr(M A^{-1} M^T), namely lambda1 / sqrt(1+lambda2).
 */
struct LassoReduction {
  Eigen::MatrixXd m_star;  // (N+m) x d
  Eigen::MatrixXd x_star;  // (N+m) x m
  double lambda = 0.0;
  double lambda2 = 0.0;
  double const_term = 0.0;
  BlockEigen eig;

  /// lambda1 / (1 + lambda2), the naive mapping. It does not preserve the
  /// objective; kept for comparison only.
  double lambda_naive = 0.0;
};

/// `m` is the d x N target, `x` the m x N (centered) feature values.
LassoReduction reduce_to_lasso(const Eigen::MatrixXd& m, const Eigen::MatrixXd& x,
                               const BlockEigen& eig, double lambda1, double lambda2);

struct SparseProjection {
  Eigen::MatrixXd u;                      // m x d
  std::vector<Index> nonzeros;            // per column
  std::vector<lars::CoefficientPath> paths;  // per column, in U units
  std::vector<lars::StopReason> stops;
  StlConfig config;
  double alpha_prime = 0.0;  // value actually used
  double alpha_used = 0.0;   // alpha after any automatic shrinking
  Index alpha_halvings = 0;
};

struct SolveOptions {
  Index workers = 1;                // concurrent column solves
  bool auto_shrink_alpha = false;   // halve alpha until A is definite
  bool lasso_modification = true;
};

/// Full pipeline: align -> PCA target -> A -> blocked eigendecomposition ->
/// reduction -> one LARS solve per column. Uncentered input is centered first.
SparseProjection solve_stl(const FeatureMatrix& x, const LabelSet& labels, const StlConfig& config,
                           const SolveOptions& options = {});

/// ||M - U^T X||^2 + alpha' tr(U^T X L X^T U) + lambda1 ||U||_1 + lambda2 ||U||^2.
double objective(const Eigen::MatrixXd& u, const Eigen::MatrixXd& x, const Eigen::MatrixXd& m,
                 const pda::AlignedLaplacian& l, double alpha_prime, double lambda1,
                 double lambda2);

/// Y = U^T X.
Eigen::MatrixXd project(const Eigen::MatrixXd& u, const Eigen::MatrixXd& x);

}  // namespace stlr::stl
