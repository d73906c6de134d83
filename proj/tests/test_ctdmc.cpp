#include "dmb/ctdmc.hpp"
#include "dmb/errors.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace dmb {
namespace {

using test::dense_generator;
using test::random_rate_matrix;
using test::uniform_int;

TEST(NoiseScheduleTest, BetaClosedForm) {
  const auto s = NoiseSchedule::linear(0.1, 10.0, 1.0);
  EXPECT_DOUBLE_EQ(beta(s, 0.0), 0.0);
  EXPECT_NEAR(beta(s, 1.0), 5.05, 1e-12);
  EXPECT_NEAR(s.beta_terminal(), 5.05, 1e-12);
  EXPECT_NEAR(beta(NoiseSchedule::linear(1.0, 1.0, 1.0), 0.5), 0.5, 1e-15);
}

TEST(NoiseScheduleTest, SigmaIsDerivativeOfBeta) {
  const auto s = NoiseSchedule::linear(0.3, 7.0, 2.0);
  for (double t : {0.1, 0.7, 1.3, 1.9}) {
    const double h = 1e-6;
    EXPECT_NEAR((s.beta(t + h) - s.beta(t - h)) / (2 * h), s.sigma(t), 1e-7);
  }
}

TEST(NoiseScheduleTest, RejectsTimeOutsideHorizon) {
  const auto s = NoiseSchedule::linear(0.1, 10.0, 1.0);
  EXPECT_THROW(s.beta(-0.1), DomainError);
  EXPECT_THROW(s.beta(1.5), DomainError);
  EXPECT_THROW(s.sigma(2.0), DomainError);
}

TEST(PermutationTest, InverseMaps) {
  const Permutation p({2, 0, 1});
  EXPECT_EQ(p.state_at(0), 2);
  EXPECT_EQ(p.position_of(2), 0);
  EXPECT_EQ(p.position_of(1), 2);
  EXPECT_FALSE(p.is_identity());
  EXPECT_TRUE(Permutation::identity(4).is_identity());
  EXPECT_THROW(Permutation({0, 0, 1}), InvalidArgument);
  EXPECT_THROW(Permutation({0, 3}), InvalidArgument);
}

TEST(FactorizedRateMatrixTest, RejectsBadRates) {
  EXPECT_THROW(FactorizedRateMatrix(Permutation::identity(3), Eigen::VectorXd::Ones(3)), InvalidArgument);
  Eigen::VectorXd neg(1);
  neg << -0.5;
  EXPECT_THROW(FactorizedRateMatrix(Permutation::identity(2), neg), InvalidArgument);
}

TEST(MaterializeDenseTest, TwoStateMatchesDefinition) {
  Eigen::VectorXd a(1);
  a << 1.0;
  Eigen::MatrixXd expected(2, 2);
  expected << -1, 1, 0, 0;
  EXPECT_TRUE(materialize_dense(FactorizedRateMatrix(Permutation::identity(2), a)).isApprox(expected));
}

TEST(MaterializeDenseTest, ZeroRatesGiveZeroMatrix) {
  EXPECT_TRUE(materialize_dense(FactorizedRateMatrix::zero(5)).isZero(0.0));
}

TEST(MaterializeDenseTest, SwappedPermutationIsConjugate) {
  Eigen::VectorXd a(2);
  a << 1.0, 2.0;
  const FactorizedRateMatrix q(Permutation({2, 1, 0}), a);
  Eigen::MatrixXd h(3, 3);
  h << -3, 1, 2, 0, -2, 2, 0, 0, 0;
  Eigen::MatrixXd swap = Eigen::MatrixXd::Zero(3, 3);
  swap(0, 2) = swap(1, 1) = swap(2, 0) = 1.0;
  const Eigen::MatrixXd dense = materialize_dense(q);
  EXPECT_TRUE(dense.isApprox(swap * h * swap.transpose()));
  EXPECT_NEAR(dense.rowwise().sum().cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(MaterializeDenseTest, GeneratorPropertyForAnyPermutation) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const FactorizedRateMatrix q = random_rate_matrix(uniform_int(rng, 2, 16), rng);
    const Eigen::MatrixXd dense = materialize_dense(q);
    EXPECT_LE(dense.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    for (int i = 0; i < q.n(); ++i) {
      for (int j = 0; j < q.n(); ++j) {
        if (i != j) {
          EXPECT_GE(dense(i, j), 0.0);
        }
        EXPECT_DOUBLE_EQ(q.rate(i, j), dense(i, j));
      }
    }
    EXPECT_TRUE(dense.isApprox(dense_generator(q.perm().order(), q.rates()), 1e-14));
  }
}

TEST(TransitionKernelTest, TwoStateLogTwo) {
  Eigen::VectorXd a(1);
  a << std::log(2.0);
  const FactorizedRateMatrix q(Permutation::identity(2), a);
  Eigen::MatrixXd expected(2, 2);
  expected << 0.5, 0.5, 0.0, 1.0;
  EXPECT_LE((transition_kernel(q, 1.0) - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((testing::expm_taylor(dense_generator({0, 1}, a)) - expected).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(TransitionKernelTest, ZeroTimeIsIdentity) {
  Rng rng(3);
  const FactorizedRateMatrix q = random_rate_matrix(7, rng);
  EXPECT_TRUE(transition_kernel(q, 0.0).isIdentity(0.0));
}

TEST(TransitionKernelTest, AbsorbingLimit) {
  Eigen::VectorXd a(2);
  a << 0.0, 1.0;
  const FactorizedRateMatrix q(Permutation::identity(3), a);
  const Eigen::MatrixXd k = transition_kernel(q, 60.0);
  for (int r = 0; r < 3; ++r) {
    EXPECT_NEAR(k(r, 2), 1.0, 1e-12);
    EXPECT_NEAR(k(r, 0) + k(r, 1), 0.0, 1e-12);
  }
}

TEST(TransitionKernelTest, MatchesTaylorOracle) {
  Rng rng(1);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const FactorizedRateMatrix q = random_rate_matrix(uniform_int(rng, 2, 16), rng);
    const double b = 5.0 * uniform01(rng);
    const Eigen::MatrixXd ref = testing::expm_taylor(b * dense_generator(q.perm().order(), q.rates()));
    worst = std::max(worst, (transition_kernel(q, b) - ref).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(TransitionKernelTest, RawRowsSumToOne) {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const FactorizedRateMatrix q = random_rate_matrix(uniform_int(rng, 2, 16), rng);
    const Eigen::MatrixXd raw = transition_kernel_raw(q, 5.0 * uniform01(rng));
    EXPECT_LE((raw.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-10);
  }
}

TEST(TransitionKernelTest, SemigroupProperty) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const FactorizedRateMatrix q = random_rate_matrix(uniform_int(rng, 2, 12), rng);
    const double b1 = 2.5 * uniform01(rng);
    const double b2 = 2.5 * uniform01(rng);
    const Eigen::MatrixXd lhs = transition_kernel(q, b1) * transition_kernel(q, b2);
    EXPECT_LE((lhs - transition_kernel(q, b1 + b2)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(TransitionKernelTest, KernelRowMatchesFullKernel) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const FactorizedRateMatrix q = random_rate_matrix(uniform_int(rng, 2, 12), rng);
    const double b = 5.0 * uniform01(rng);
    const Eigen::MatrixXd k = transition_kernel(q, b);
    for (int x = 0; x < q.n(); ++x) EXPECT_LE((kernel_row(q, b, x) - k.row(x).transpose()).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(EvolveTest, TwoStateMixture) {
  Eigen::VectorXd a(1);
  a << std::log(2.0);
  const FactorizedRateMatrix q(Permutation::identity(2), a);
  const ProbVector out = evolve(ProbVector{0.5, 0.5}, q, 1.0);
  EXPECT_NEAR(out[0], 0.25, 1e-14);
  EXPECT_NEAR(out[1], 0.75, 1e-14);
}

TEST(EvolveTest, ZeroTimeReturnsInput) {
  Rng rng(6);
  const FactorizedRateMatrix q = random_rate_matrix(6, rng);
  const Eigen::VectorXd p = testing::random_simplex(6, rng);
  EXPECT_EQ(evolve(p, q, 0.0), p);
}

TEST(EvolveTest, AbsorbingConcentratesOnPermutedLastState) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(4);
  a[3] = 1.0;
  const FactorizedRateMatrix q(Permutation({4, 1, 3, 0, 2}), a);
  Eigen::VectorXd p0 = Eigen::VectorXd::Zero(5);
  p0[0] = 1.0;
  const Eigen::VectorXd out = evolve(p0, q, 50.0);
  EXPECT_NEAR(out[2], 1.0, 1e-12);
}

TEST(EvolveTest, ConservesMassForUnnormalizedInputs) {
  Rng rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = uniform_int(rng, 2, 16);
    const FactorizedRateMatrix q = random_rate_matrix(n, rng);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = 20.0 * uniform01(rng) - 5.0;
    const Eigen::VectorXd out = evolve(v, q, 5.0 * uniform01(rng));
    worst = std::max(worst, std::abs(out.sum() - v.sum()) / std::max(1.0, v.cwiseAbs().sum()));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(ReverseRateRowTest, UniformRatiosGiveTransposedRow) {
  Rng rng(8);
  const FactorizedRateMatrix q = random_rate_matrix(5, rng);
  const Eigen::MatrixXd dense = materialize_dense(q);
  const double sigma = 1.7;
  for (int x = 0; x < 5; ++x) {
    const Eigen::VectorXd row = reverse_rate_row(q, sigma, Eigen::VectorXd::Ones(5), x);
    for (int y = 0; y < 5; ++y) {
      if (y != x) {
        EXPECT_NEAR(row[y], sigma * dense(y, x), 1e-14);
      }
    }
    EXPECT_NEAR(row.sum(), 0.0, 1e-12);
  }
}

TEST(ReverseRateRowTest, TwoStateHandExpansion) {
  Eigen::VectorXd a(1);
  a << 1.0;
  const FactorizedRateMatrix q(Permutation::identity(2), a);
  Eigen::VectorXd ratios(2);
  ratios << 2.0, 1.0;
  const Eigen::VectorXd row = reverse_rate_row(q, 1.0, ratios, 1);
  EXPECT_DOUBLE_EQ(row[0], 2.0);
  EXPECT_DOUBLE_EQ(row[1], -2.0);
}

TEST(ReverseRateRowTest, NoFluxWithZeroRatios) {
  Rng rng(9);
  const FactorizedRateMatrix q = random_rate_matrix(4, rng);
  Eigen::VectorXd ratios = Eigen::VectorXd::Zero(4);
  ratios[2] = 1.0;
  EXPECT_TRUE(reverse_rate_row(q, 2.0, ratios, 2).isZero(0.0));
}

}  // namespace
}  // namespace dmb
