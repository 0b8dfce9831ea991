// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "stlr/dataset.hpp"

/**
 * Least angle regression for min ||m - X u||^2 + lambda ||u||_1.
 *
 * Correlations carry the factor 2 of the squared-loss gradient,
 * c = 2 X^T (m - X u). Along a step of length gamma in fitted space every
 * active correlation shrinks by 2 * gamma * A_A, so all step-length ratios
 * are divided by that factor; the entering order and the path are the same
 * as for factor-free LARS, and the breakpoint lambda equals max |c|.
 */
namespace stlr::lars {

inline constexpr double kGradientFactor = 2.0;

/// c = 2 X^T (target - fitted).
Eigen::VectorXd correlations(const Eigen::MatrixXd& x, const Eigen::VectorXd& target,
                             const Eigen::VectorXd& fitted);

struct Equiangular {
  Eigen::VectorXd direction;  // y_A, unit norm
  double scale = 0.0;         // A_A = (1^T G_A^{-1} 1)^{-1/2}
  Eigen::VectorXd a;          // inner products of the design columns with y_A
  Eigen::VectorXd weights;    // y_A = X_A_signed * weights
};

/// Equiangular direction of sign-adjusted active columns. `a` is
/// X_A_signed^T y_A (all equal to A_A) unless a full design is supplied.
/// Throws RankError when the active columns are linearly dependent.
Equiangular equiangular(const Eigen::MatrixXd& signed_active);
Equiangular equiangular(const Eigen::MatrixXd& signed_active, const Eigen::MatrixXd& x);

struct StepChoice {
  double gamma = 0.0;
  Index entering = -1;  // -1: no inactive feature ties before the least-squares point
};

/// min+ over inactive j of (c~ - c_j) / (f (A_A - a_j)) and
/// (c~ + c_j) / (f (A_A + a_j)), with c~ = max |c| and f the gradient factor.
/// Zero denominators and nonpositive ratios are skipped; ties go to the lowest
/// index. With no inactive features the terminal step c~ / (f A_A) is returned.
/// Throws NumericalError when inactive features exist but none qualifies.
StepChoice choose_step(const Eigen::VectorXd& c, const Eigen::VectorXd& a, double scale,
                       std::span<const Index> active, double gradient_factor = kGradientFactor);

double step_length(const Eigen::VectorXd& c, const Eigen::VectorXd& a, double scale,
                   std::span<const Index> active, double gradient_factor = kGradientFactor);

struct LarsOptions {
  Index max_features = std::numeric_limits<Index>::max();  // K
  double lambda_stop = 0.0;        // stop once max |c| reaches this (0 disables)
  bool lasso_modification = true;  // drop features whose coefficient crosses zero
  bool normalize = false;          // solve on unit-norm columns, report on the input scale
  double rank_tolerance = 1e-10;   // relative Schur-complement floor for a new feature
  Index max_steps = 0;             // 0 -> 8 * p + 16
};

struct Breakpoint {
  Eigen::VectorXd coef;  // input scale
  double one_norm = 0.0;
  double lambda = 0.0;   // max |c| at this point
  std::vector<Index> active;
};

struct CoefficientPath {
  std::vector<Breakpoint> breakpoints;
};

enum class StopReason {
  max_features,  // K features active
  lambda,        // reached lambda_stop
  full_path,     // reached the least-squares fit on the active set
  rank_limited,  // next feature is collinear with the active set
  zero_residual,
  max_steps,
};

std::string_view to_string(StopReason reason);

struct LarsResult {
  Eigen::VectorXd coef;   // input scale
  CoefficientPath path;   // starts at the origin
  Eigen::VectorXd scale;  // column norms used for normalization (ones if off)
  StopReason stop = StopReason::full_path;
  Index steps = 0;

  bool rank_limited() const noexcept { return stop == StopReason::rank_limited; }
  Index nonzeros() const noexcept { return (coef.array() != 0.0).count(); }
};

/// Solver state between breakpoints, in design (possibly normalized) units.
struct LarsState {
  std::vector<Index> active;
  std::vector<int> signs;     // parallel to active
  Eigen::MatrixXd gram;       // signed Gram of the active columns
  Eigen::MatrixXd gram_inv;   // maintained incrementally
  Eigen::VectorXd fitted;     // X u
  Eigen::VectorXd coef;
  Eigen::VectorXd correlations;
  double max_correlation = 0.0;
};

class LarsSolver {
 public:
  LarsSolver(const Eigen::MatrixXd& x, const Eigen::VectorXd& target, LarsOptions options = {});

  bool done() const noexcept { return done_; }
  /// Advances to the next breakpoint. No-op once done.
  void step();
  void run();

  const LarsState& state() const noexcept { return state_; }
  const Eigen::MatrixXd& design() const noexcept { return *design_; }
  const Eigen::VectorXd& target() const noexcept { return target_; }
  LarsResult result() const;

 private:
  bool add(Index j);
  void drop(std::size_t position);
  void refresh_correlations();
  void record();
  void stop(StopReason reason);
  Index argmax_allowed(Index excluded) const;

  Eigen::MatrixXd scaled_;
  const Eigen::MatrixXd* design_;
  Eigen::VectorXd target_;
  Eigen::VectorXd scale_;
  LarsOptions options_;
  LarsState state_;
  CoefficientPath path_;
  StopReason stop_ = StopReason::full_path;
  bool done_ = false;
  Index steps_ = 0;
  Index just_dropped_ = -1;
  Index max_steps_ = 0;
};

LarsResult lars(const Eigen::MatrixXd& x, const Eigen::VectorXd& target,
                const LarsOptions& options = {});

/// Stops once K features are active and the path reaches the next event.
LarsResult lars_k(const Eigen::MatrixXd& x, const Eigen::VectorXd& target, Index k);

/// Path as CSV: one_norm then one column per coefficient.
void write_path_csv(std::ostream& out, const CoefficientPath& path,
                    std::span<const std::string> feature_names = {});

}  // namespace stlr::lars
