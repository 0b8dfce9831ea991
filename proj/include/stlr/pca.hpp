// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include "stlr/dataset.hpp"

namespace stlr::pca {

/// Top-d principal-component scores of a centered matrix.
struct PcaTarget {
  Eigen::MatrixXd scores;   // d x N, unwhitened: basis^T X
  Eigen::MatrixXd basis;    // m x d, orthonormal columns
  Eigen::VectorXd eigvals;  // length d, covariance eigenvalues (1/N normalization), nonincreasing
  Index rank = 0;           // numerical rank of X
  bool used_gram = false;   // decomposed the N x N Gram matrix instead of the m x m covariance
};

/// `x` must be centered. Decomposes whichever of X X^T and X^T X is smaller.
/// Each basis column is sign-fixed so its largest-magnitude entry is >= 0.
/// Throws RankError when d exceeds the numerical rank.
PcaTarget pca_target(const FeatureMatrix& x, Index d);
PcaTarget pca_target(const Eigen::MatrixXd& centered, Index d);

}  // namespace stlr::pca
