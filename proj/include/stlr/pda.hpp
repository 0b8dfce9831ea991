// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <Eigen/Core>

#include "stlr/dataset.hpp"

/// Pair-wise discriminant analysis: per-patch Laplacians for every labeled
/// relevant sample, aligned into one global Laplacian.
namespace stlr::pda {

struct PatchWeights {
  double beta = 1.0;
  double beta_prime = 1.0;  // beta * N+ / N-
  Index n_plus = 0;
  Index n_minus = 0;
  Eigen::VectorXd w;  // [1 x N+, -beta' x N-]
};

PatchWeights weight_vector(Index n_plus, Index n_minus, double beta);

/// L_i = [-e^T; I] diag(w) [-e I], size (len(w)+1)^2. Row/column 0 is the
/// patch center.
Eigen::MatrixXd patch_laplacian(const Eigen::VectorXd& w);
inline Eigen::MatrixXd patch_laplacian(const PatchWeights& w) { return patch_laplacian(w.w); }

/**
 * Global N x N Laplacian. Only rows/columns of labeled samples can be
 * nonzero, so it is stored as the dense labeled block plus the index map
 * `support` (relevant indices first, then irrelevant, in label order).
 */
class AlignedLaplacian {
 public:
  AlignedLaplacian(Index n, std::vector<Index> support, Eigen::MatrixXd block,
                   Index n_plus, Index n_minus);

  Index size() const noexcept { return n_; }
  const std::vector<Index>& support() const noexcept { return support_; }
  const Eigen::MatrixXd& block() const noexcept { return block_; }
  Index n_plus() const noexcept { return n_plus_; }
  Index n_minus() const noexcept { return n_minus_; }

  double at(Index p, Index q) const;
  Eigen::MatrixXd dense() const;

  /// tr(Y L Y^T) for a d x N embedding, touching only the labeled columns.
  double trace_form(const Eigen::MatrixXd& y) const;

  /// Columns of `y` restricted to the support, in support order.
  Eigen::MatrixXd gather(const Eigen::MatrixXd& y) const;

 private:
  Index n_;
  std::vector<Index> support_;
  Eigen::MatrixXd block_;
  Index n_plus_;
  Index n_minus_;
  std::vector<Index> position_;  // global index -> block position or -1
};

/// One patch per relevant sample with index vector [i, relevant..., irrelevant...];
/// patches are summed in relevant-label order.
AlignedLaplacian align(const LabelSet& labels, double beta, Index n);

}  // namespace stlr::pda
