// SPDX-License-Identifier: Apache-2.0
#include "stlr/lars.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "stlr/error.hpp"

namespace stlr::lars {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::max_features: return "max_features";
    case StopReason::lambda: return "lambda";
    case StopReason::full_path: return "full_path";
    case StopReason::rank_limited: return "rank_limited";
    case StopReason::zero_residual: return "zero_residual";
    case StopReason::max_steps: return "max_steps";
  }
  return "unknown";
}

Eigen::VectorXd correlations(const Eigen::MatrixXd& x, const Eigen::VectorXd& target,
                             const Eigen::VectorXd& fitted) {
  if (x.rows() != target.size() || target.size() != fitted.size()) {
    throw ParameterError("correlations: dimension mismatch");
  }
  return kGradientFactor * (x.transpose() * (target - fitted));
}

Equiangular equiangular(const Eigen::MatrixXd& signed_active) {
  return equiangular(signed_active, signed_active);
}

Equiangular equiangular(const Eigen::MatrixXd& signed_active, const Eigen::MatrixXd& x) {
  if (signed_active.cols() == 0) throw ParameterError("equiangular: empty active set");
  if (x.rows() != signed_active.rows()) throw ParameterError("equiangular: dimension mismatch");
  const Eigen::MatrixXd gram = signed_active.transpose() * signed_active;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const double floor = 1e-12 * std::max(1.0, gram.diagonal().maxCoeff());
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= floor) {
    throw RankError("equiangular: active columns are linearly dependent",
                    static_cast<long>(signed_active.cols()) - 1);
  }
  const Eigen::VectorXd g = ldlt.solve(Eigen::VectorXd::Ones(gram.rows()));
  Equiangular out;
  out.scale = 1.0 / std::sqrt(g.sum());
  out.weights = out.scale * g;
  out.direction = signed_active * out.weights;
  out.a = x.transpose() * out.direction;
  return out;
}

StepChoice choose_step(const Eigen::VectorXd& c, const Eigen::VectorXd& a, double scale,
                       std::span<const Index> active, double gradient_factor) {
  if (c.size() != a.size()) throw ParameterError("step_length: c and a differ in length");
  if (!(scale > 0.0)) throw ParameterError("step_length: A_A must be positive");
  const double c_max = c.cwiseAbs().maxCoeff();
  std::vector<char> is_active(static_cast<std::size_t>(c.size()), 0);
  for (Index j : active) is_active.at(static_cast<std::size_t>(j)) = 1;

  StepChoice best{kInf, -1};
  bool any_inactive = false;
  for (Index j = 0; j < c.size(); ++j) {
    if (is_active[static_cast<std::size_t>(j)]) continue;
    any_inactive = true;
    for (double sign : {-1.0, 1.0}) {
      const double denom = gradient_factor * (scale + sign * a(j));
      if (denom == 0.0) continue;
      const double gamma = (c_max + sign * c(j)) / denom;
      if (gamma > 0.0 && gamma < best.gamma) best = {gamma, j};
    }
  }
  if (!any_inactive) return {c_max / (gradient_factor * scale), -1};
  if (best.entering < 0) throw NumericalError("step_length: no positive step candidate");
  return best;
}

double step_length(const Eigen::VectorXd& c, const Eigen::VectorXd& a, double scale,
                   std::span<const Index> active, double gradient_factor) {
  return choose_step(c, a, scale, active, gradient_factor).gamma;
}

LarsSolver::LarsSolver(const Eigen::MatrixXd& x, const Eigen::VectorXd& target,
                       LarsOptions options)
    : design_(&x), target_(target), options_(options) {
  if (x.rows() != target.size()) throw ParameterError("lars: X rows must match target length");
  if (options_.max_features < 0) throw ParameterError("lars: K must be >= 0");
  if (!(options_.lambda_stop >= 0.0)) throw ParameterError("lars: lambda_stop must be >= 0");
  if (!x.allFinite() || !target.allFinite()) throw DataError("lars: non-finite input");
  const Index p = x.cols();
  scale_ = Eigen::VectorXd::Ones(p);
  if (options_.normalize) {
    scaled_ = x;
    for (Index j = 0; j < p; ++j) {
      const double norm = x.col(j).norm();
      if (norm > 0.0) {
        scale_(j) = norm;
        scaled_.col(j) /= norm;
      }
    }
    design_ = &scaled_;
  }
  max_steps_ = options_.max_steps > 0 ? options_.max_steps : 8 * p + 16;

  state_.fitted = Eigen::VectorXd::Zero(x.rows());
  state_.coef = Eigen::VectorXd::Zero(p);
  refresh_correlations();
  record();

  if (options_.max_features == 0 || p == 0) {
    stop(StopReason::max_features);
  } else if (state_.max_correlation <= 0.0) {
    stop(StopReason::zero_residual);
  } else if (options_.lambda_stop > 0.0 && state_.max_correlation <= options_.lambda_stop) {
    stop(StopReason::lambda);
  } else if (!add(argmax_allowed(-1))) {
    stop(StopReason::rank_limited);
  }
}

void LarsSolver::refresh_correlations() {
  state_.correlations = kGradientFactor * (design_->transpose() * (target_ - state_.fitted));
  state_.max_correlation = state_.correlations.size() ? state_.correlations.cwiseAbs().maxCoeff() : 0.0;
}

void LarsSolver::record() {
  Breakpoint bp;
  bp.coef = state_.coef.cwiseQuotient(scale_);
  bp.one_norm = bp.coef.lpNorm<1>();
  bp.lambda = state_.max_correlation;
  bp.active = state_.active;
  path_.breakpoints.push_back(std::move(bp));
}

void LarsSolver::stop(StopReason reason) {
  stop_ = reason;
  done_ = true;
}

Index LarsSolver::argmax_allowed(Index excluded) const {
  Index best = -1;
  double best_value = -1.0;
  for (Index j = 0; j < state_.correlations.size(); ++j) {
    if (j == excluded) continue;
    const double v = std::abs(state_.correlations(j));
    if (v > best_value) {
      best_value = v;
      best = j;
    }
  }
  return best;
}

bool LarsSolver::add(Index j) {
  const Eigen::MatrixXd& x = *design_;
  const int sign = state_.correlations(j) < 0.0 ? -1 : 1;
  const double diag = x.col(j).squaredNorm();
  if (!(diag > 0.0)) return false;
  const auto k = static_cast<Index>(state_.active.size());
  if (k == 0) {
    state_.gram = Eigen::MatrixXd::Constant(1, 1, diag);
    state_.gram_inv = Eigen::MatrixXd::Constant(1, 1, 1.0 / diag);
  } else {
    Eigen::VectorXd b(k);
    for (Index i = 0; i < k; ++i) {
      const Index col = state_.active[static_cast<std::size_t>(i)];
      b(i) = state_.signs[static_cast<std::size_t>(i)] * sign * x.col(col).dot(x.col(j));
    }
    const Eigen::VectorXd g = state_.gram_inv * b;
    const double schur = diag - b.dot(g);
    if (schur <= options_.rank_tolerance * diag) return false;

    Eigen::MatrixXd gram(k + 1, k + 1);
    gram.topLeftCorner(k, k) = state_.gram;
    gram.topRightCorner(k, 1) = b;
    gram.bottomLeftCorner(1, k) = b.transpose();
    gram(k, k) = diag;

    Eigen::MatrixXd inv(k + 1, k + 1);
    inv.topLeftCorner(k, k) = state_.gram_inv + g * g.transpose() / schur;
    inv.topRightCorner(k, 1) = -g / schur;
    inv.bottomLeftCorner(1, k) = -g.transpose() / schur;
    inv(k, k) = 1.0 / schur;

    state_.gram = std::move(gram);
    state_.gram_inv = std::move(inv);
  }
  state_.active.push_back(j);
  state_.signs.push_back(sign);
  return true;
}

void LarsSolver::drop(std::size_t position) {
  const auto k = static_cast<Index>(state_.active.size());
  const auto p = static_cast<Index>(position);
  std::vector<Index> keep;
  keep.reserve(static_cast<std::size_t>(k - 1));
  for (Index i = 0; i < k; ++i) {
    if (i != p) keep.push_back(i);
  }
  const auto r = static_cast<Index>(keep.size());
  Eigen::MatrixXd gram(r, r);
  Eigen::MatrixXd inv(r, r);
  const double pivot = state_.gram_inv(p, p);
  for (Index a = 0; a < r; ++a) {
    for (Index b = 0; b < r; ++b) {
      const Index ia = keep[static_cast<std::size_t>(a)];
      const Index ib = keep[static_cast<std::size_t>(b)];
      gram(a, b) = state_.gram(ia, ib);
      inv(a, b) = state_.gram_inv(ia, ib) - state_.gram_inv(ia, p) * state_.gram_inv(p, ib) / pivot;
    }
  }
  state_.coef(state_.active[position]) = 0.0;
  state_.gram = std::move(gram);
  state_.gram_inv = std::move(inv);
  state_.active.erase(state_.active.begin() + static_cast<std::ptrdiff_t>(position));
  state_.signs.erase(state_.signs.begin() + static_cast<std::ptrdiff_t>(position));
}

void LarsSolver::step() {
  if (done_) return;
  if (steps_ >= max_steps_) {
    stop(StopReason::max_steps);
    return;
  }
  const Index excluded = just_dropped_;
  just_dropped_ = -1;

  if (state_.active.empty()) {
    const Index j = argmax_allowed(excluded);
    if (j < 0 || !add(j)) {
      stop(StopReason::rank_limited);
      return;
    }
  }

  const Eigen::MatrixXd& x = *design_;
  const auto k = static_cast<Index>(state_.active.size());
  const Eigen::VectorXd g = state_.gram_inv * Eigen::VectorXd::Ones(k);
  const double g_sum = g.sum();
  if (!(g_sum > 0.0)) throw NumericalError("lars: active Gram inverse lost definiteness");
  const double a_scale = 1.0 / std::sqrt(g_sum);
  Eigen::VectorXd dir_coef(k);  // coefficient change per unit step
  Eigen::VectorXd direction = Eigen::VectorXd::Zero(x.rows());
  for (Index i = 0; i < k; ++i) {
    dir_coef(i) = state_.signs[static_cast<std::size_t>(i)] * a_scale * g(i);
    direction += dir_coef(i) * x.col(state_.active[static_cast<std::size_t>(i)]);
  }
  const Eigen::VectorXd a = x.transpose() * direction;
  const double c_max = state_.max_correlation;

  enum class Event { least_squares, add, drop, lambda };
  Event event = Event::least_squares;
  double gamma = c_max / (kGradientFactor * a_scale);
  Index entering = -1;
  std::size_t leaving = 0;

  std::vector<char> is_active(static_cast<std::size_t>(x.cols()), 0);
  for (Index j : state_.active) is_active[static_cast<std::size_t>(j)] = 1;
  for (Index j = 0; j < x.cols(); ++j) {
    if (is_active[static_cast<std::size_t>(j)]) continue;
    const double cj = state_.correlations(j);
    // A feature dropped at this breakpoint still ties at gamma = 0; only a
    // later crossing may bring it back.
    const double floor = j == excluded ? 1e-12 * gamma : 0.0;
    for (double sign : {-1.0, 1.0}) {
      const double denom = kGradientFactor * (a_scale + sign * a(j));
      if (denom <= 0.0) continue;
      const double numer = c_max + sign * cj;
      if (numer < 0.0) continue;
      const double cand = numer / denom;
      if (cand <= floor) continue;
      if (cand < gamma) {
        gamma = cand;
        entering = j;
        event = Event::add;
      }
    }
  }
  if (options_.lasso_modification) {
    for (Index i = 0; i < k; ++i) {
      const double coef = state_.coef(state_.active[static_cast<std::size_t>(i)]);
      if (dir_coef(i) == 0.0 || coef == 0.0) continue;
      const double cand = -coef / dir_coef(i);
      if (cand > 0.0 && cand <= gamma) {
        gamma = cand;
        leaving = static_cast<std::size_t>(i);
        event = Event::drop;
      }
    }
  }
  if (options_.lambda_stop > 0.0) {
    const double cand = (c_max - options_.lambda_stop) / (kGradientFactor * a_scale);
    if (cand <= gamma) {
      gamma = std::max(cand, 0.0);
      event = Event::lambda;
    }
  }

  for (Index i = 0; i < k; ++i) {
    state_.coef(state_.active[static_cast<std::size_t>(i)]) += gamma * dir_coef(i);
  }
  state_.fitted += gamma * direction;
  ++steps_;

  switch (event) {
    case Event::least_squares: {
      // Land exactly on the active-set least-squares fit.
      Eigen::MatrixXd xa(x.rows(), k);
      for (Index i = 0; i < k; ++i) xa.col(i) = x.col(state_.active[static_cast<std::size_t>(i)]);
      const Eigen::VectorXd exact = xa.colPivHouseholderQr().solve(target_);
      if (exact.allFinite()) {
        for (Index i = 0; i < k; ++i) state_.coef(state_.active[static_cast<std::size_t>(i)]) = exact(i);
        state_.fitted = xa * exact;
      }
      refresh_correlations();
      record();
      stop(StopReason::full_path);
      return;
    }
    case Event::lambda:
      refresh_correlations();
      record();
      stop(StopReason::lambda);
      return;
    case Event::drop:
      just_dropped_ = state_.active[leaving];
      drop(leaving);
      refresh_correlations();
      record();
      return;
    case Event::add:
      refresh_correlations();
      record();
      if (state_.max_correlation <= 0.0) {
        stop(StopReason::zero_residual);
      } else if (static_cast<Index>(state_.active.size()) >= options_.max_features) {
        stop(StopReason::max_features);
      } else if (!add(entering)) {
        stop(StopReason::rank_limited);
      }
      return;
  }
}

void LarsSolver::run() {
  while (!done_) step();
}

LarsResult LarsSolver::result() const {
  LarsResult out;
  out.coef = state_.coef.cwiseQuotient(scale_);
  out.path = path_;
  out.scale = scale_;
  out.stop = stop_;
  out.steps = steps_;
  return out;
}

LarsResult lars(const Eigen::MatrixXd& x, const Eigen::VectorXd& target, const LarsOptions& options) {
  LarsSolver solver(x, target, options);
  solver.run();
  return solver.result();
}

LarsResult lars_k(const Eigen::MatrixXd& x, const Eigen::VectorXd& target, Index k) {
  LarsOptions options;
  options.max_features = k;
  return lars(x, target, options);
}

void write_path_csv(std::ostream& out, const CoefficientPath& path,
                    std::span<const std::string> feature_names) {
  if (path.breakpoints.empty()) return;
  const Index p = path.breakpoints.front().coef.size();
  out << "one_norm";
  for (Index j = 0; j < p; ++j) {
    if (static_cast<std::size_t>(j) < feature_names.size()) {
      out << ',' << feature_names[static_cast<std::size_t>(j)];
    } else {
      out << ",f" << j;
    }
  }
  out << '\n';
  for (const auto& bp : path.breakpoints) {
    out << format_double(bp.one_norm);
    for (Index j = 0; j < p; ++j) out << ',' << format_double(bp.coef(j));
    out << '\n';
  }
}

}  // namespace stlr::lars
