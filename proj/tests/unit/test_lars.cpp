// SPDX-License-Identifier: Apache-2.0
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stlr/error.hpp"
#include "stlr/lars.hpp"

using namespace stlr;
using namespace stlr::lars;

namespace {

double path_tolerance(const Eigen::VectorXd& y) { return 1e-6 * std::max(1.0, y.squaredNorm()); }

}  // namespace

TEST(Correlations, IdentityDesignCarriesFactorTwo) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::Vector2d m(3, 1);
  const Eigen::VectorXd c = correlations(x, m, Eigen::Vector2d::Zero());
  EXPECT_EQ(c(0), 6.0);
  EXPECT_EQ(c(1), 2.0);
  EXPECT_EQ(correlations(x, m, m).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Correlations, MatchNegativeGradient) {
  std::mt19937_64 g(7);
  const Eigen::MatrixXd x = oracle::gaussian(9, 4, g);
  const Eigen::VectorXd m = oracle::gaussian(9, 1, g);
  const Eigen::VectorXd u = oracle::gaussian(4, 1, g);
  const Eigen::VectorXd c = correlations(x, m, x * u);
  const Eigen::VectorXd fd = oracle::finite_gradient([&](const Eigen::VectorXd& v) { return -(m - x * v).squaredNorm(); }, u);
  EXPECT_LE((c - fd).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, c.cwiseAbs().maxCoeff()));
}

TEST(Equiangular, SingleColumn) {
  Eigen::VectorXd x(3);
  x << 0.6, 0.0, -0.8;
  const Equiangular e = equiangular(-x);
  EXPECT_TRUE(e.direction.isApprox(-x, 1e-14));
  EXPECT_NEAR(e.scale, 1.0, 1e-14);
}

TEST(Equiangular, OrthonormalPair) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Identity(3, 2);
  const Equiangular e = equiangular(x);
  EXPECT_NEAR(e.scale, 1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_TRUE(e.direction.isApprox((x.col(0) + x.col(1)) / std::sqrt(2.0), 1e-14));
}

TEST(Equiangular, RandomColumnsMakeEqualAngles) {
  std::mt19937_64 g(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd xa = oracle::gaussian(12, 1 + trial % 5, g);
    const Eigen::MatrixXd full = oracle::gaussian(12, 7, g);
    const Equiangular e = equiangular(xa, full);
    EXPECT_NEAR(e.direction.norm(), 1.0, 1e-10);
    const Eigen::VectorXd inner = xa.transpose() * e.direction;
    EXPECT_LE((inner.array() - e.scale).abs().maxCoeff(), 1e-9);
    EXPECT_LE((e.a - full.transpose() * e.direction).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Equiangular, DependentColumnsAreRankErrors) {
  Eigen::MatrixXd xa(3, 2);
  xa << 1, 2, 1, 2, 0, 0;
  EXPECT_THROW(equiangular(xa), RankError);
}

TEST(StepLength, OrthonormalDesign) {
  // X = I2, m = [3, 1], A = {0}: c = [6, 2], y_A = e0, A_A = 1, a = [1, 0].
  const Eigen::Vector2d c(6, 2), a(1, 0);
  const std::vector<Index> active{0};
  const StepChoice s = choose_step(c, a, 1.0, active);
  EXPECT_DOUBLE_EQ(s.gamma, 2.0);
  EXPECT_EQ(s.entering, 1);
}

TEST(StepLength, TerminalStep) {
  const Eigen::Vector2d c(4, -4), a(2, -2);
  const std::vector<Index> all{0, 1};
  // The factor-free terminal step c~/A_A, and the same step under the
  // factor-2 correlations c = 2 X^T r.
  EXPECT_DOUBLE_EQ(step_length(c, a, 2.0, all, 1.0), 2.0);
  EXPECT_DOUBLE_EQ(step_length(c, a, 2.0, all), 1.0);
}

TEST(StepLength, NoQualifyingCandidateIsNumericalError) {
  const Eigen::Vector2d c(2, -2), a(1, 1);
  const std::vector<Index> active{0};
  EXPECT_THROW(choose_step(c, a, 1.0, active), NumericalError);
}

TEST(StepLength, PostStepTieHolds) {
  std::mt19937_64 g(9);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::MatrixXd x = oracle::gaussian(15, 6, g);
    const Eigen::VectorXd m = oracle::gaussian(15, 1, g);
    LarsSolver solver(x, m, LarsOptions{});
    solver.step();
    for (int k = 0; k < 3 && !solver.done(); ++k) {
      const LarsState& st = solver.state();
      const Eigen::VectorXd c = correlations(x, m, st.fitted);
      const double cmax = c.cwiseAbs().maxCoeff();
      for (Index j : st.active) EXPECT_NEAR(std::abs(c(j)), cmax, 1e-8 * std::max(1.0, cmax));
      solver.step();
    }
  }
}

TEST(LarsK, OrthonormalDesignOneFeature) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Identity(2, 2);
  const LarsResult r = lars_k(x, Eigen::Vector2d(3, 1), 1);
  EXPECT_NEAR(r.coef(0), 2.0, 1e-14);
  EXPECT_EQ(r.coef(1), 0.0);
  EXPECT_EQ(r.stop, StopReason::max_features);
  ASSERT_EQ(r.path.breakpoints.size(), 2u);
}

TEST(LarsK, ZeroFeatures) {
  std::mt19937_64 g(1);
  const LarsResult r = lars_k(oracle::gaussian(5, 3, g), oracle::gaussian(5, 1, g), 0);
  EXPECT_EQ(r.coef.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.path.breakpoints.size(), 1u);
}

TEST(LarsK, FullRankReachesLeastSquares) {
  std::mt19937_64 g(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd x = oracle::gaussian(6, 6, g);
    const Eigen::VectorXd m = oracle::gaussian(6, 1, g);
    const LarsResult r = lars_k(x, m, 6);
    const Eigen::VectorXd ls = oracle::least_squares(x, m);
    EXPECT_LE((r.coef - ls).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, ls.cwiseAbs().maxCoeff()));
  }
}

TEST(LarsK, CoefficientCountNeverExceedsK) {
  std::mt19937_64 g(12);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::MatrixXd x = oracle::gaussian(20, 10, g);
    const Eigen::VectorXd m = oracle::gaussian(20, 1, g);
    for (Index k = 1; k <= 10; k += 3) EXPECT_LE(lars_k(x, m, k).nonzeros(), k);
  }
}

TEST(LarsK, RankLimitedDesignStopsWithFlag) {
  std::mt19937_64 g(13);
  Eigen::MatrixXd x = oracle::gaussian(3, 6, g);  // rank 3
  const LarsResult r = lars_k(x, oracle::gaussian(3, 1, g), 6);
  EXPECT_LE(r.nonzeros(), 3);
  EXPECT_TRUE(r.stop == StopReason::rank_limited || r.stop == StopReason::zero_residual);
}

TEST(LarsPath, EveryBreakpointSatisfiesKkt) {
  std::mt19937_64 g(14);
  for (int trial = 0; trial < 40; ++trial) {
    const Index p = 2 + static_cast<Index>(g() % 7);
    const Eigen::MatrixXd x = oracle::gaussian(12, p, g);
    const Eigen::VectorXd m = oracle::gaussian(12, 1, g);
    const LarsResult r = lars::lars(x, m);
    for (const auto& bp : r.path.breakpoints) {
      EXPECT_LE(oracle::kkt_violation(x, m, bp.coef, bp.lambda), path_tolerance(m));
    }
  }
}

TEST(LarsPath, BreakpointsMatchExhaustiveLasso) {
  std::mt19937_64 g(15);
  for (int trial = 0; trial < 15; ++trial) {
    const Index p = 2 + static_cast<Index>(g() % 5);
    const Eigen::MatrixXd x = oracle::gaussian(10, p, g);
    const Eigen::VectorXd m = oracle::gaussian(10, 1, g);
    const LarsResult r = lars::lars(x, m);
    for (const auto& bp : r.path.breakpoints) {
      if (bp.lambda <= 1e-9) continue;
      const Eigen::VectorXd ref = oracle::exhaustive_lasso(x, m, bp.lambda);
      EXPECT_LE((bp.coef - ref).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(LarsPath, InvariantsAlongThePath) {
  std::mt19937_64 g(16);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::MatrixXd x = oracle::gaussian(14, 7, g);
    const Eigen::VectorXd m = oracle::gaussian(14, 1, g);
    LarsSolver solver(x, m);
    double last_norm = 0.0;
    while (!solver.done()) {
      solver.step();
      const LarsState& st = solver.state();
      if (st.active.empty()) continue;
      // Incrementally maintained Gram and inverse equal a from-scratch build.
      Eigen::MatrixXd xa(14, static_cast<Index>(st.active.size()));
      for (std::size_t a = 0; a < st.active.size(); ++a) xa.col(static_cast<Index>(a)) = st.signs[a] * x.col(st.active[a]);
      const Eigen::MatrixXd gram = xa.transpose() * xa;
      EXPECT_LE((st.gram - gram).cwiseAbs().maxCoeff(), 1e-9 * std::max(1.0, gram.cwiseAbs().maxCoeff()));
      EXPECT_LE((st.gram_inv * gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-8);
      const Eigen::VectorXd c = correlations(x, m, x * st.coef);
      const double cmax = c.cwiseAbs().maxCoeff();
      for (Index j : st.active) EXPECT_NEAR(std::abs(c(j)), cmax, 1e-8 * std::max(1.0, cmax));
    }
    for (const auto& bp : solver.result().path.breakpoints) {
      EXPECT_GE(bp.one_norm, last_norm - 1e-12);
      last_norm = bp.one_norm;
    }
  }
}

TEST(LarsPath, LassoModificationDropsSignChanges) {
  // A design known to force a drop: correlated columns with opposing signs.
  std::mt19937_64 g(17);
  int drops = 0;
  for (int trial = 0; trial < 200 && drops == 0; ++trial) {
    Eigen::MatrixXd x = oracle::gaussian(8, 5, g);
    x.col(1) = 0.9 * x.col(0) + 0.3 * x.col(1);
    const Eigen::VectorXd m = oracle::gaussian(8, 1, g);
    const LarsResult r = lars::lars(x, m);
    for (std::size_t b = 1; b < r.path.breakpoints.size(); ++b) {
      if (r.path.breakpoints[b].active.size() < r.path.breakpoints[b - 1].active.size()) ++drops;
    }
    for (const auto& bp : r.path.breakpoints) EXPECT_LE(oracle::kkt_violation(x, m, bp.coef, bp.lambda), path_tolerance(m));
  }
  EXPECT_GT(drops, 0);
}

TEST(LarsPath, PureLarsNeverDrops) {
  std::mt19937_64 g(18);
  LarsOptions o;
  o.lasso_modification = false;
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::MatrixXd x = oracle::gaussian(10, 6, g);
    const LarsResult r = lars::lars(x, oracle::gaussian(10, 1, g), o);
    for (std::size_t b = 1; b < r.path.breakpoints.size(); ++b) {
      EXPECT_GE(r.path.breakpoints[b].active.size(), r.path.breakpoints[b - 1].active.size());
    }
  }
}

TEST(LarsPath, LambdaStopIsSecondary) {
  std::mt19937_64 g(19);
  const Eigen::MatrixXd x = oracle::gaussian(12, 6, g);
  const Eigen::VectorXd m = oracle::gaussian(12, 1, g);
  const LarsResult full = lars::lars(x, m);
  const double target = 0.5 * full.path.breakpoints[2].lambda + 0.5 * full.path.breakpoints[3].lambda;
  LarsOptions o;
  o.lambda_stop = target;
  const LarsResult r = lars::lars(x, m, o);
  EXPECT_EQ(r.stop, StopReason::lambda);
  EXPECT_NEAR(r.path.breakpoints.back().lambda, target, 1e-9);
  EXPECT_LE(oracle::kkt_violation(x, m, r.coef, target), path_tolerance(m));
  // K binds first when smaller.
  o.max_features = 1;
  EXPECT_EQ(lars::lars(x, m, o).stop, StopReason::max_features);
}

TEST(LarsPath, TiesGoToLowestIndex) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Identity(3, 3);
  const LarsResult r = lars_k(x, Eigen::Vector3d(1, 2, 2), 1);
  EXPECT_EQ(r.path.breakpoints[1].active, (std::vector<Index>{1}));
}

TEST(LarsPath, NormalizedColumnsReportInputScale) {
  std::mt19937_64 g(20);
  Eigen::MatrixXd x = oracle::gaussian(10, 4, g);
  x.col(2) *= 30.0;
  const Eigen::VectorXd m = oracle::gaussian(10, 1, g);
  LarsOptions o;
  o.normalize = true;
  const LarsResult r = lars::lars(x, m, o);
  EXPECT_NEAR(r.scale(2), x.col(2).norm(), 1e-12);
  EXPECT_LE((r.coef - oracle::least_squares(x, m)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(PathCsv, HeaderAndOriginRow) {
  const LarsResult r = lars_k(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(3, 1), 1);
  std::ostringstream os;
  write_path_csv(os, r.path);
  std::istringstream in(os.str());
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  EXPECT_EQ(header, "one_norm,f0,f1");
  EXPECT_EQ(first, "0,0,0");
  EXPECT_EQ(second, "2,2,0");
}
