// SPDX-License-Identifier: Apache-2.0
#include "stlr/stl.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "stlr/error.hpp"
#include "stlr/parallel.hpp"

namespace stlr::stl {
namespace {

constexpr double kDefiniteFloor = 1e-10;

double block_min_eigenvalue(const Eigen::MatrixXd& block) {
  if (block.size() == 0) return 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(block, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
  return solver.eigenvalues()(0);
}

Eigen::MatrixXd shifted_block(const pda::AlignedLaplacian& l, double alpha_prime) {
  const auto s = static_cast<Index>(l.support().size());
  return Eigen::MatrixXd::Identity(s, s) + alpha_prime * l.block();
}

}  // namespace

void StlConfig::validate() const {
  for (double v : {alpha, beta, lambda1, lambda2}) {
    if (!std::isfinite(v)) throw ParameterError("StlConfig: parameters must be finite");
  }
  if (alpha < 0.0) throw ParameterError("StlConfig: alpha must be >= 0");
  if (!(beta > 0.0)) throw ParameterError("StlConfig: beta must be > 0");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ParameterError("StlConfig: lambda1, lambda2 must be >= 0");
  if (d < 1) throw ParameterError("StlConfig: d must be >= 1");
  if (k < 1) throw ParameterError("StlConfig: K must be >= 1");
}

double StlConfig::alpha_prime(Index n, Index n_plus) const {
  if (n_plus < 1) throw ParameterError("alpha_prime: N+ must be >= 1");
  return alpha * static_cast<double>(n) / (static_cast<double>(n_plus) * static_cast<double>(n_plus));
}

Eigen::MatrixXd BlockedSymmetric::dense() const {
  Eigen::MatrixXd full = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t a = 0; a < support.size(); ++a) {
    for (std::size_t b = 0; b < support.size(); ++b) {
      full(support[a], support[b]) = block(static_cast<Index>(a), static_cast<Index>(b));
    }
  }
  return full;
}

double max_admissible_alpha_prime(const pda::AlignedLaplacian& l, double upper) {
  double lo = 0.0;
  double hi = upper;
  if (block_min_eigenvalue(shifted_block(l, hi)) > kDefiniteFloor) return hi;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (block_min_eigenvalue(shifted_block(l, mid)) > kDefiniteFloor) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

BlockedSymmetric assemble_a(const pda::AlignedLaplacian& l, double alpha_prime) {
  if (!(alpha_prime >= 0.0) || !std::isfinite(alpha_prime)) {
    throw ParameterError("assemble_A: alpha' must be finite and >= 0");
  }
  BlockedSymmetric a{l.size(), l.support(), shifted_block(l, alpha_prime)};
  const double min_eig = block_min_eigenvalue(a.block);
  if (!(min_eig > kDefiniteFloor)) {
    const double bound = max_admissible_alpha_prime(l, alpha_prime);
    throw NotPositiveDefinite("alpha' L + I is not positive definite (min eigenvalue " +
                                  std::to_string(min_eig) + "); largest admissible alpha' is " +
                                  std::to_string(bound),
                              min_eig, bound);
  }
  return a;
}

Eigen::VectorXd BlockEigen::eigenvalues() const {
  Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
  for (std::size_t b = 0; b < support.size(); ++b) d(support[b]) = block_values(static_cast<Index>(b));
  return d;
}

Eigen::MatrixXd BlockEigen::vectors() const {
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t a = 0; a < support.size(); ++a) {
    for (std::size_t b = 0; b < support.size(); ++b) {
      v(support[a], support[b]) = block_vectors(static_cast<Index>(a), static_cast<Index>(b));
    }
  }
  return v;
}

Eigen::MatrixXd BlockEigen::apply_transpose(const Eigen::MatrixXd& z) const {
  if (z.rows() != n) throw ParameterError("BlockEigen: operand has wrong row count");
  Eigen::MatrixXd out = z;
  const auto s = static_cast<Index>(support.size());
  Eigen::MatrixXd zs(s, z.cols());
  for (Index a = 0; a < s; ++a) zs.row(a) = z.row(support[static_cast<std::size_t>(a)]);
  const Eigen::MatrixXd rotated = block_vectors.transpose() * zs;
  for (Index b = 0; b < s; ++b) out.row(support[static_cast<std::size_t>(b)]) = rotated.row(b);
  return out;
}

Eigen::MatrixXd BlockEigen::apply(const Eigen::MatrixXd& z) const {
  if (z.rows() != n) throw ParameterError("BlockEigen: operand has wrong row count");
  Eigen::MatrixXd out = z;
  const auto s = static_cast<Index>(support.size());
  Eigen::MatrixXd zs(s, z.cols());
  for (Index b = 0; b < s; ++b) zs.row(b) = z.row(support[static_cast<std::size_t>(b)]);
  const Eigen::MatrixXd rotated = block_vectors * zs;
  for (Index a = 0; a < s; ++a) out.row(support[static_cast<std::size_t>(a)]) = rotated.row(a);
  return out;
}

BlockEigen eigendecompose_blocked(const BlockedSymmetric& a) {
  BlockEigen out;
  out.n = a.n;
  out.support = a.support;
  if (a.block.size() == 0) {
    out.block_vectors.resize(0, 0);
    out.block_values.resize(0);
    return out;
  }
  const Eigen::MatrixXd sym = 0.5 * (a.block + a.block.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalError("eigendecompose_blocked: solver failed");
  out.block_vectors = solver.eigenvectors();
  out.block_values = solver.eigenvalues();
  return out;
}

BlockEigen eigendecompose_blocked(const Eigen::MatrixXd& a, const std::vector<Index>& support) {
  const Index n = a.rows();
  if (a.cols() != n) throw ParameterError("eigendecompose_blocked: matrix must be square");
  std::vector<char> in_support(static_cast<std::size_t>(n), 0);
  for (Index p : support) {
    if (p < 0 || p >= n || in_support[static_cast<std::size_t>(p)]) {
      throw ParameterError("eigendecompose_blocked: invalid support index");
    }
    in_support[static_cast<std::size_t>(p)] = 1;
  }
  const double tol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff());
  for (Index q = 0; q < n; ++q) {
    for (Index p = 0; p < n; ++p) {
      if (in_support[static_cast<std::size_t>(p)] && in_support[static_cast<std::size_t>(q)]) continue;
      const double expected = p == q ? 1.0 : 0.0;
      if (std::abs(a(p, q) - expected) > tol) {
        throw ContractError("eigendecompose_blocked: entry (" + std::to_string(p) + ", " +
                            std::to_string(q) + ") lies outside the declared support");
      }
    }
  }
  BlockedSymmetric blocked{n, support, Eigen::MatrixXd(support.size(), support.size())};
  for (std::size_t i = 0; i < support.size(); ++i) {
    for (std::size_t j = 0; j < support.size(); ++j) {
      blocked.block(static_cast<Index>(i), static_cast<Index>(j)) = a(support[i], support[j]);
    }
  }
  return eigendecompose_blocked(blocked);
}

LassoReduction reduce_to_lasso(const Eigen::MatrixXd& m, const Eigen::MatrixXd& x,
                               const BlockEigen& eig, double lambda1, double lambda2) {
  const Index n = x.cols();
  const Index dims = x.rows();
  const Index d = m.rows();
  if (m.cols() != n || eig.n != n) throw ParameterError("reduce_to_lasso: N mismatch");
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ParameterError("reduce_to_lasso: lambdas must be >= 0");
  const Eigen::VectorXd values = eig.eigenvalues();
  if (!(values.minCoeff() > 0.0)) {
    throw NumericalError("reduce_to_lasso: nonpositive eigenvalue " + std::to_string(values.minCoeff()));
  }
  const Eigen::VectorXd sqrt_d = values.cwiseSqrt();
  const double shrink = 1.0 / std::sqrt(1.0 + lambda2);

  LassoReduction out;
  out.lambda2 = lambda2;
  out.lambda = lambda1 * shrink;
  out.lambda_naive = lambda1 / (1.0 + lambda2);
  out.eig = eig;

  // (V D^{1/2})^{-1} = D^{-1/2} V^T by orthogonality.
  const Eigen::MatrixXd top_m = sqrt_d.cwiseInverse().asDiagonal() * eig.apply_transpose(m.transpose());
  const Eigen::MatrixXd top_x = sqrt_d.asDiagonal() * eig.apply_transpose(x.transpose());

  out.m_star = Eigen::MatrixXd::Zero(n + dims, d);
  out.m_star.topRows(n) = top_m;
  out.x_star.resize(n + dims, dims);
  out.x_star.topRows(n) = shrink * top_x;
  out.x_star.bottomRows(dims) = (shrink * std::sqrt(lambda2)) * Eigen::MatrixXd::Identity(dims, dims);
  out.const_term = top_m.squaredNorm();
  return out;
}

SparseProjection solve_stl(const FeatureMatrix& x, const LabelSet& labels, const StlConfig& config,
                           const SolveOptions& options) {
  config.validate();
  const Index n = x.size();
  labels.validate(n);
  const FeatureMatrix xc = x.centered() ? x : center(x);

  const pda::AlignedLaplacian l = pda::align(labels, config.beta, n);
  const pca::PcaTarget target = pca::pca_target(xc, config.d);

  StlConfig used = config;
  Index halvings = 0;
  BlockedSymmetric a;
  while (true) {
    try {
      a = assemble_a(l, used.alpha_prime(n, labels.n_plus()));
      break;
    } catch (const NotPositiveDefinite&) {
      if (!options.auto_shrink_alpha || halvings >= 64) throw;
      used.alpha *= 0.5;
      ++halvings;
    }
  }
  const double alpha_prime = used.alpha_prime(n, labels.n_plus());

  const BlockEigen eig = eigendecompose_blocked(a);
  const LassoReduction red = reduce_to_lasso(target.scores, xc.values(), eig, config.lambda1, config.lambda2);

  const Index dims = xc.dims();
  const double unscale = 1.0 / std::sqrt(1.0 + config.lambda2);
  SparseProjection out;
  out.u = Eigen::MatrixXd::Zero(dims, config.d);
  out.nonzeros.assign(static_cast<std::size_t>(config.d), 0);
  out.paths.resize(static_cast<std::size_t>(config.d));
  out.stops.resize(static_cast<std::size_t>(config.d));
  out.config = config;
  out.alpha_prime = alpha_prime;
  out.alpha_used = used.alpha;
  out.alpha_halvings = halvings;

  lars::LarsOptions lo;
  lo.max_features = config.k;
  lo.lambda_stop = red.lambda;
  lo.lasso_modification = options.lasso_modification;

  parallel_for(config.d, options.workers, [&](Index j) {
    const lars::LarsResult res = lars::lars(red.x_star, red.m_star.col(j), lo);
    out.u.col(j) = unscale * res.coef;
    auto& path = out.paths[static_cast<std::size_t>(j)];
    path = res.path;
    for (auto& bp : path.breakpoints) {
      bp.coef *= unscale;
      bp.one_norm *= unscale;
    }
    out.nonzeros[static_cast<std::size_t>(j)] = res.nonzeros();
    out.stops[static_cast<std::size_t>(j)] = res.stop;
  });
  return out;
}

double objective(const Eigen::MatrixXd& u, const Eigen::MatrixXd& x, const Eigen::MatrixXd& m,
                 const pda::AlignedLaplacian& l, double alpha_prime, double lambda1, double lambda2) {
  if (u.rows() != x.rows() || m.cols() != x.cols() || m.rows() != u.cols()) {
    throw ParameterError("objective: shape mismatch");
  }
  const Eigen::MatrixXd y = u.transpose() * x;
  return (m - y).squaredNorm() + alpha_prime * l.trace_form(y) + lambda1 * u.cwiseAbs().sum() +
         lambda2 * u.squaredNorm();
}

Eigen::MatrixXd project(const Eigen::MatrixXd& u, const Eigen::MatrixXd& x) {
  if (u.rows() != x.rows()) throw ParameterError("project: U rows must equal feature dimension");
  return u.transpose() * x;
}

}  // namespace stlr::stl
