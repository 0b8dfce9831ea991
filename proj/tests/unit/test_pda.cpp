// SPDX-License-Identifier: Apache-2.0
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "stlr/error.hpp"
#include "stlr/pda.hpp"

using namespace stlr;
using namespace stlr::pda;

TEST(WeightVector, Examples) {
  const auto a = weight_vector(2, 3, 1.0);
  EXPECT_DOUBLE_EQ(a.beta_prime, 2.0 / 3.0);
  ASSERT_EQ(a.w.size(), 5);
  EXPECT_EQ(a.w(0), 1.0);
  EXPECT_EQ(a.w(1), 1.0);
  for (int k = 2; k < 5; ++k) EXPECT_EQ(a.w(k), -2.0 / 3.0);

  const auto b = weight_vector(1, 1, 1.0);
  EXPECT_EQ(b.beta_prime, 1.0);
  EXPECT_EQ(b.w(0), 1.0);
  EXPECT_EQ(b.w(1), -1.0);

  const auto c = weight_vector(3, 2, 0.5);
  EXPECT_EQ(c.beta_prime, 0.75);
  EXPECT_EQ(c.w(2), 1.0);
  EXPECT_EQ(c.w(3), -0.75);
  EXPECT_EQ(c.w(4), -0.75);
}

TEST(WeightVector, Errors) {
  EXPECT_THROW(weight_vector(0, 3, 1.0), ParameterError);
  EXPECT_THROW(weight_vector(2, 0, 1.0), ParameterError);
  EXPECT_THROW(weight_vector(2, 3, 0.0), ParameterError);
  EXPECT_THROW(weight_vector(2, 3, -1.0), ParameterError);
}

TEST(PatchLaplacian, SingleUnitWeight) {
  Eigen::VectorXd w(1);
  w << 1;
  Eigen::MatrixXd expected(2, 2);
  expected << 1, -1, -1, 1;
  EXPECT_EQ(patch_laplacian(w), expected);
}

TEST(PatchLaplacian, PlusMinusWeights) {
  Eigen::VectorXd w(2);
  w << 1, -1;
  Eigen::MatrixXd expected(3, 3);
  expected << 0, -1, 1, -1, 1, 0, 1, 0, -1;
  EXPECT_EQ(patch_laplacian(w), expected);
}

TEST(PatchLaplacian, TraceMatchesWeightedPairwiseSum) {
  std::mt19937_64 g(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Index k = 1 + static_cast<Index>(g() % 9);
    const Eigen::VectorXd w = oracle::gaussian(k, 1, g);
    const Eigen::MatrixXd yi = oracle::gaussian(3, k + 1, g);
    const Eigen::MatrixXd li = patch_laplacian(w);
    EXPECT_TRUE(li.isApprox(li.transpose(), 0.0));
    const double lhs = (yi * li * yi.transpose()).trace();
    const double rhs = oracle::weighted_pairwise(yi, w);
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(Align, TwoSampleBlock) {
  const LabelSet labels{{0}, {1}};
  const AlignedLaplacian l = align(labels, 1.0, 2);
  Eigen::MatrixXd expected(2, 2);
  expected << -1, 1, 1, -1;
  EXPECT_TRUE(l.dense().isApprox(expected, 1e-15));
  std::mt19937_64 g(1);
  const Eigen::MatrixXd y = oracle::gaussian(2, 2, g);
  EXPECT_NEAR(l.trace_form(y), -(y.col(0) - y.col(1)).squaredNorm(), 1e-12);
}

TEST(Align, UnlabeledRowsAndColumnsAreZero) {
  const LabelSet labels{{1, 4}, {2, 7, 8}};
  const Eigen::MatrixXd l = align(labels, 0.7, 10).dense();
  for (Index p : {0, 3, 5, 6, 9}) {
    EXPECT_EQ(l.row(p).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(l.col(p).cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_TRUE(l.isApprox(l.transpose(), 1e-12));
}

TEST(Align, RandomTraceFormEqualsDoubleSum) {
  std::mt19937_64 g(30);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Index> rel, irr;
    const Index np = 1 + static_cast<Index>(g() % 6), nm = 1 + static_cast<Index>(g() % 8);
    oracle::random_labels(30, np, nm, g, rel, irr);
    const double beta = 0.05 + 1.95 * std::uniform_real_distribution<double>(0, 1)(g);
    const AlignedLaplacian l = align(LabelSet{rel, irr}, beta, 30);
    const Eigen::MatrixXd y = oracle::gaussian(3, 30, g);
    const double lhs = l.trace_form(y) / static_cast<double>(np * np);
    const double rhs = oracle::pda_double_sum(y, rel, irr, beta);
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(rhs)));
    // Dense form agrees with the implicit trace form.
    EXPECT_NEAR((y * l.dense() * y.transpose()).trace(), l.trace_form(y), 1e-9 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Align, BetaScalesIrrelevantTermLinearly) {
  std::mt19937_64 g(31);
  std::vector<Index> rel, irr;
  oracle::random_labels(20, 4, 5, g, rel, irr);
  const Eigen::MatrixXd y = oracle::gaussian(2, 20, g);
  const double np = 4.0;
  auto irrelevant_term = [&](double beta) {
    const double same = oracle::pda_double_sum(y, rel, irr, 0.0);
    return same - align(LabelSet{rel, irr}, beta, 20).trace_form(y) / (np * np);
  };
  const double t1 = irrelevant_term(0.4);
  EXPECT_NEAR(irrelevant_term(1.2), 3.0 * t1, 1e-10 * std::abs(t1));
  EXPECT_NEAR(t1, 0.4 * oracle::irrelevant_pair_sum(y, rel, irr) / (4.0 * 5.0), 1e-10 * std::abs(t1));
}

TEST(Align, SupportOrderAndAccessors) {
  const LabelSet labels{{5, 2}, {0}};
  const AlignedLaplacian l = align(labels, 1.0, 6);
  EXPECT_EQ(l.support(), (std::vector<Index>{5, 2, 0}));
  EXPECT_EQ(l.n_plus(), 2);
  EXPECT_EQ(l.n_minus(), 1);
  EXPECT_EQ(l.at(1, 1), 0.0);
  EXPECT_EQ(l.at(5, 2), l.at(2, 5));
}

TEST(Align, Errors) {
  EXPECT_THROW(align(LabelSet{{}, {1}}, 1.0, 3), ParameterError);
  EXPECT_THROW(align(LabelSet{{0}, {1}}, 0.0, 3), ParameterError);
  EXPECT_THROW(align(LabelSet{{0}, {3}}, 1.0, 3), ParameterError);
}
