// SPDX-License-Identifier: Apache-2.0
#include "stlr/pda.hpp"

#include <cmath>

#include "stlr/error.hpp"

namespace stlr::pda {

PatchWeights weight_vector(Index n_plus, Index n_minus, double beta) {
  if (n_plus < 1 || n_minus < 1) {
    throw ParameterError("weight_vector: need N+ >= 1 and N- >= 1");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ParameterError("weight_vector: beta must be > 0");
  PatchWeights pw;
  pw.beta = beta;
  pw.beta_prime = beta * static_cast<double>(n_plus) / static_cast<double>(n_minus);
  pw.n_plus = n_plus;
  pw.n_minus = n_minus;
  pw.w.resize(n_plus + n_minus);
  pw.w.head(n_plus).setOnes();
  pw.w.tail(n_minus).setConstant(-pw.beta_prime);
  return pw;
}

Eigen::MatrixXd patch_laplacian(const Eigen::VectorXd& w) {
  const Index k = w.size();
  Eigen::MatrixXd li = Eigen::MatrixXd::Zero(k + 1, k + 1);
  li(0, 0) = w.sum();
  li.block(0, 1, 1, k) = -w.transpose();
  li.block(1, 0, k, 1) = -w;
  li.block(1, 1, k, k) = w.asDiagonal();
  return li;
}

AlignedLaplacian::AlignedLaplacian(Index n, std::vector<Index> support, Eigen::MatrixXd block,
                                   Index n_plus, Index n_minus)
    : n_(n),
      support_(std::move(support)),
      block_(std::move(block)),
      n_plus_(n_plus),
      n_minus_(n_minus),
      position_(static_cast<std::size_t>(n), -1) {
  const auto s = static_cast<Index>(support_.size());
  if (block_.rows() != s || block_.cols() != s) {
    throw ContractError("AlignedLaplacian: block size does not match support");
  }
  for (Index a = 0; a < s; ++a) {
    const Index p = support_[static_cast<std::size_t>(a)];
    if (p < 0 || p >= n_ || position_[static_cast<std::size_t>(p)] != -1) {
      throw ContractError("AlignedLaplacian: invalid or repeated support index");
    }
    position_[static_cast<std::size_t>(p)] = a;
  }
}

double AlignedLaplacian::at(Index p, Index q) const {
  const Index a = position_.at(static_cast<std::size_t>(p));
  const Index b = position_.at(static_cast<std::size_t>(q));
  if (a < 0 || b < 0) return 0.0;
  return block_(a, b);
}

Eigen::MatrixXd AlignedLaplacian::dense() const {
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n_, n_);
  const auto s = static_cast<Index>(support_.size());
  for (Index a = 0; a < s; ++a) {
    for (Index b = 0; b < s; ++b) {
      full(support_[static_cast<std::size_t>(a)], support_[static_cast<std::size_t>(b)]) = block_(a, b);
    }
  }
  return full;
}

Eigen::MatrixXd AlignedLaplacian::gather(const Eigen::MatrixXd& y) const {
  if (y.cols() != n_) throw ParameterError("AlignedLaplacian: embedding has wrong column count");
  Eigen::MatrixXd ys(y.rows(), static_cast<Index>(support_.size()));
  for (std::size_t a = 0; a < support_.size(); ++a) ys.col(static_cast<Index>(a)) = y.col(support_[a]);
  return ys;
}

double AlignedLaplacian::trace_form(const Eigen::MatrixXd& y) const {
  const Eigen::MatrixXd ys = gather(y);
  return (ys * block_ * ys.transpose()).trace();
}

AlignedLaplacian align(const LabelSet& labels, double beta, Index n) {
  labels.validate(n);
  const PatchWeights pw = weight_vector(labels.n_plus(), labels.n_minus(), beta);
  const Eigen::MatrixXd li = patch_laplacian(pw);

  std::vector<Index> support;
  support.reserve(static_cast<std::size_t>(labels.n_labeled()));
  support.insert(support.end(), labels.relevant_idx.begin(), labels.relevant_idx.end());
  support.insert(support.end(), labels.irrelevant_idx.begin(), labels.irrelevant_idx.end());

  const Index nl = labels.n_labeled();
  // Patch i's index vector F_i = [i, support...]; in block coordinates the
  // patch center of relevant sample a sits at position a.
  std::vector<Index> f(static_cast<std::size_t>(nl + 1));
  for (Index q = 0; q < nl; ++q) f[static_cast<std::size_t>(q + 1)] = q;

  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(nl, nl);
  for (Index a = 0; a < labels.n_plus(); ++a) {
    f[0] = a;
    for (Index p = 0; p <= nl; ++p) {
      for (Index q = 0; q <= nl; ++q) {
        block(f[static_cast<std::size_t>(p)], f[static_cast<std::size_t>(q)]) += li(p, q);
      }
    }
  }
  return AlignedLaplacian(n, std::move(support), std::move(block), labels.n_plus(), labels.n_minus());
}

}  // namespace stlr::pda
