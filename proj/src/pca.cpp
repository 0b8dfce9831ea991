// SPDX-License-Identifier: Apache-2.0
#include "stlr/pca.hpp"

#include <Eigen/Eigenvalues>

#include "stlr/error.hpp"

namespace stlr::pca {
namespace {

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0.0) v = -v;
}

}  // namespace

PcaTarget pca_target(const FeatureMatrix& x, Index d) {
  if (!x.centered()) throw ContractError("pca_target: feature matrix must be centered");
  return pca_target(x.values(), d);
}

PcaTarget pca_target(const Eigen::MatrixXd& x, Index d) {
  const Index m = x.rows();
  const Index n = x.cols();
  if (d < 1) throw ParameterError("pca_target: d must be >= 1");

  const bool use_gram = n < m;
  const Eigen::MatrixXd gram = use_gram ? Eigen::MatrixXd(x.transpose() * x)
                                        : Eigen::MatrixXd(x * x.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) throw NumericalError("pca_target: eigendecomposition failed");

  // Eigen returns ascending eigenvalues.
  const Eigen::VectorXd& values = solver.eigenvalues();
  const Index k = values.size();
  const double top = std::max(values(k - 1), 0.0);
  const double tol = 1e-10 * top;
  Index rank = 0;
  for (Index j = 0; j < k; ++j) rank += (top > 0.0 && values(j) > tol) ? 1 : 0;
  if (d > rank) {
    throw RankError("pca_target: d = " + std::to_string(d) + " exceeds the data rank " +
                        std::to_string(rank),
                    static_cast<long>(rank));
  }

  PcaTarget out;
  out.rank = rank;
  out.used_gram = use_gram;
  out.basis.resize(m, d);
  out.eigvals.resize(d);
  for (Index j = 0; j < d; ++j) {
    const Index src = k - 1 - j;
    const double lambda = values(src);
    if (use_gram) {
      // u = X v / sqrt(lambda); re-orthogonalize against earlier columns since
      // small eigenvalues amplify rounding in the Gram route.
      Eigen::VectorXd u = x * solver.eigenvectors().col(src) / std::sqrt(lambda);
      for (Index i = 0; i < j; ++i) u -= out.basis.col(i).dot(u) * out.basis.col(i);
      out.basis.col(j) = u.normalized();
    } else {
      out.basis.col(j) = solver.eigenvectors().col(src);
    }
    fix_sign(out.basis.col(j));
    out.eigvals(j) = lambda / static_cast<double>(n);
  }
  out.scores = out.basis.transpose() * x;
  return out;
}

}  // namespace stlr::pca
