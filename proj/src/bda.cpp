// SPDX-License-Identifier: Apache-2.0
#include "stlr/bda.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "stlr/error.hpp"

namespace stlr::bda {
namespace {

void check_indices(const std::vector<Index>& idx, Index n) {
  for (Index i : idx) {
    if (i < 0 || i >= n) throw ParameterError("label index out of range");
  }
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0.0) v = -v;
}

}  // namespace

ScatterPair scatter_matrices(const Eigen::MatrixXd& x, const LabelSet& labels) {
  if (labels.relevant_idx.empty()) throw ParameterError("scatter_matrices: empty relevant set");
  check_indices(labels.relevant_idx, x.cols());
  check_indices(labels.irrelevant_idx, x.cols());
  const Index m = x.rows();
  ScatterPair out;
  out.m_plus = Eigen::VectorXd::Zero(m);
  for (Index i : labels.relevant_idx) out.m_plus += x.col(i);
  out.m_plus /= static_cast<double>(labels.n_plus());
  out.s_plus = Eigen::MatrixXd::Zero(m, m);
  out.s_minus = Eigen::MatrixXd::Zero(m, m);
  for (Index i : labels.relevant_idx) {
    const Eigen::VectorXd dv = x.col(i) - out.m_plus;
    out.s_plus.noalias() += dv * dv.transpose();
  }
  for (Index i : labels.irrelevant_idx) {
    const Eigen::VectorXd dv = x.col(i) - out.m_plus;
    out.s_minus.noalias() += dv * dv.transpose();
  }
  return out;
}

BdaSubspace bda_subspace(const Eigen::MatrixXd& x, const LabelSet& labels, Index d, double ridge) {
  const Index m = x.rows();
  if (d < 1 || d > m) throw ParameterError("bda_subspace: need 1 <= d <= m");
  if (!(ridge >= 0.0)) throw ParameterError("bda_subspace: ridge must be >= 0");
  const ScatterPair sp = scatter_matrices(x, labels);

  BdaSubspace out;
  const double scale = std::max({sp.s_plus.cwiseAbs().maxCoeff(), sp.s_minus.cwiseAbs().maxCoeff(), 1e-300});
  if (sp.s_minus.cwiseAbs().maxCoeff() <= 1e-14 * scale) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sp.s_plus);
    out.u = solver.eigenvectors().leftCols(d);
    out.eigvals = Eigen::VectorXd::Zero(d);
    for (Index j = 0; j < d; ++j) fix_sign(out.u.col(j));
    out.degenerate = true;
    return out;
  }

  const Eigen::MatrixXd b = sp.s_plus + ridge * Eigen::MatrixXd::Identity(m, m);
  Eigen::LLT<Eigen::MatrixXd> llt(b);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("bda_subspace: S+ + ridge I is singular; increase the ridge");
  }
  const Eigen::MatrixXd lower = llt.matrixL();
  if (lower.diagonal().minCoeff() <= 1e-12 * std::sqrt(b.diagonal().maxCoeff())) {
    throw NumericalError("bda_subspace: S+ + ridge I is numerically singular; increase the ridge");
  }
  // C = L^{-1} S- L^{-T}; generalized eigenvectors are L^{-T} z.
  const Eigen::MatrixXd half = llt.matrixL().solve(sp.s_minus);
  const Eigen::MatrixXd c = llt.matrixL().solve(half.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (c + c.transpose()));
  if (solver.info() != Eigen::Success) throw NumericalError("bda_subspace: eigensolver failed");
  out.u.resize(m, d);
  out.eigvals.resize(d);
  for (Index j = 0; j < d; ++j) {
    const Index src = m - 1 - j;
    Eigen::VectorXd v = llt.matrixU().solve(solver.eigenvectors().col(src));
    v.normalize();
    fix_sign(v);
    out.u.col(j) = v;
    out.eigvals(j) = solver.eigenvalues()(src);
  }
  return out;
}

CrossTermExpansion verify_cross_term_expansion(const Eigen::MatrixXd& y, const LabelSet& labels) {
  if (labels.relevant_idx.empty()) throw ParameterError("verify_cross_term_expansion: empty relevant set");
  check_indices(labels.relevant_idx, y.cols());
  check_indices(labels.irrelevant_idx, y.cols());
  const double np = static_cast<double>(labels.n_plus());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(y.rows());
  for (Index j : labels.relevant_idx) mean += y.col(j);
  mean /= np;

  auto expand = [&](const std::vector<Index>& centers, double& lhs, double& pairwise, double& cross) {
    lhs = pairwise = cross = 0.0;
    for (Index i : centers) {
      lhs += (y.col(i) - mean).squaredNorm();
      for (Index j : labels.relevant_idx) pairwise += (y.col(i) - y.col(j)).squaredNorm();
      for (std::size_t a = 0; a < labels.relevant_idx.size(); ++a) {
        for (std::size_t b = 0; b < labels.relevant_idx.size(); ++b) {
          if (a == b) continue;
          cross += (y.col(i) - y.col(labels.relevant_idx[a])).dot(y.col(i) - y.col(labels.relevant_idx[b]));
        }
      }
    }
    pairwise /= np * np;
    cross /= np * np;
  };

  CrossTermExpansion out;
  expand(labels.irrelevant_idx, out.lhs_minus, out.pairwise_minus, out.cross_minus);
  expand(labels.relevant_idx, out.lhs_plus, out.pairwise_plus, out.cross_plus);
  out.rhs_minus = out.pairwise_minus + out.cross_minus;
  out.rhs_plus = out.pairwise_plus + out.cross_plus;
  return out;
}

}  // namespace stlr::bda
