#include "hsicwae/kernel_stats.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using hsicwae::KernelSpec;
using hsicwae::Matrix;
using hsicwae::Rng;

TEST(Mmd, ConstantKernelGivesZero) {
  // sigma^2 huge makes the RBF kernel exactly 1 on these points.
  Matrix x(3, 1), y(4, 1);
  x << 0, 1, 2;
  y << 5, 6, 7, 8;
  EXPECT_EQ(hsicwae::mmd_u_sq(KernelSpec::rbf(1e300), x, y).value, 0.0);
}

TEST(Mmd, TwoPointSetsCanBeNegative) {
  Matrix x(2, 1);
  x << 0, 1;
  EXPECT_NEAR(hsicwae::mmd_u_sq(KernelSpec::rbf(0.5), x, x).value, std::exp(-1.0) - 1.0, 1e-12);
}

TEST(Mmd, MatchesLoopOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const Matrix x = oracle::random_matrix(30, 3, rng);
    const Matrix y = oracle::random_matrix(30, 3, rng, 1.5);
    EXPECT_NEAR(hsicwae::mmd_u_sq(KernelSpec::imq(), x, y).value, oracle::mmd_u_sq(oracle::imq(), x, y), 1e-12);
    EXPECT_NEAR(hsicwae::mmd_u_sq(KernelSpec::rbf(2.0), x, y).value, oracle::mmd_u_sq(oracle::rbf(2.0), x, y),
                1e-12);
  }
}

TEST(Mmd, SymmetricAndPermutationInvariant) {
  Rng rng(3);
  const Matrix x = oracle::random_matrix(17, 2, rng);
  const Matrix y = oracle::random_matrix(11, 2, rng);
  const double v = hsicwae::mmd_u_sq(KernelSpec::imq(), x, y).value;
  EXPECT_EQ(hsicwae::mmd_u_sq(KernelSpec::imq(), y, x).value, v);
  const double p = hsicwae::mmd_u_sq(KernelSpec::imq(), hsicwae::permute_rows(x, rng.permutation(17)),
                                     hsicwae::permute_rows(y, rng.permutation(11)))
                       .value;
  EXPECT_NEAR(p, v, 1e-14);
}

TEST(Mmd, Preconditions) {
  EXPECT_THROW(hsicwae::mmd_u_sq(KernelSpec::imq(), Matrix::Zero(1, 2), Matrix::Zero(3, 2)),
               hsicwae::PreconditionError);
  EXPECT_THROW(hsicwae::mmd_u_sq(KernelSpec::imq(), Matrix::Zero(3, 2), Matrix::Zero(3, 1)), hsicwae::ShapeError);
}

TEST(Hsic, TwoSampleClosedForm) {
  Rng rng(17);
  for (int t = 0; t < 10; ++t) {
    const Matrix x = oracle::random_matrix(2, 3, rng);
    const Matrix y = oracle::random_matrix(2, 1, rng);
    const KernelSpec kk = KernelSpec::rbf(1.3);
    const KernelSpec kl = KernelSpec::imq();
    const double a = hsicwae::gram(kk, x)(0, 1);
    const double b = hsicwae::gram(kl, y)(0, 1);
    EXPECT_NEAR(hsicwae::hsic_b(kk, kl, x, y).value, (1.0 - a) * (1.0 - b) / 4.0, 1e-12);
  }
}

TEST(Hsic, ConstantYGivesZero) {
  Rng rng(2);
  const Matrix x = oracle::random_matrix(20, 3, rng);
  const Matrix y = Matrix::Constant(20, 1, 4.0);
  EXPECT_NEAR(hsicwae::hsic_b(KernelSpec::rbf(1.0), KernelSpec::rbf(1.0), x, y).value, 0.0, 1e-12);
}

TEST(Hsic, TraceFormMatchesExpandedSums) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    const Matrix x = oracle::random_matrix(40, 5, rng);
    const Matrix y = oracle::random_matrix(40, 1, rng);
    const double sk = oracle::median_sigma2(x);
    const double sl = oracle::median_sigma2(y);
    const double lib = hsicwae::hsic_b(KernelSpec::rbf(sk), KernelSpec::rbf(sl), x, y).value;
    EXPECT_NEAR(lib, oracle::hsic_b_expanded(oracle::rbf(sk), oracle::rbf(sl), x, y), 1e-10);
  }
}

TEST(Hsic, JointPermutationInvariantButYAloneIsNot) {
  Rng rng(6);
  const Matrix x = oracle::random_matrix(25, 2, rng);
  const Matrix y = x.col(0) + 0.1 * oracle::random_matrix(25, 1, rng);
  const KernelSpec k = KernelSpec::rbf(1.0);
  const double v = hsicwae::hsic_b(k, k, x, y).value;
  const auto perm = rng.permutation(25);
  EXPECT_NEAR(hsicwae::hsic_b(k, k, hsicwae::permute_rows(x, perm), hsicwae::permute_rows(y, perm)).value, v, 1e-14);
  EXPECT_GT(std::abs(hsicwae::hsic_b(k, k, x, hsicwae::permute_rows(y, perm)).value - v), 1e-6);
}

TEST(Hsic, NonNegativeForPsdKernels) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Matrix x = oracle::random_matrix(15, 2, rng);
    const Matrix y = oracle::random_matrix(15, 3, rng);
    EXPECT_GE(hsicwae::hsic_b(hsicwae::rbf_median(x), KernelSpec::imq(), x, y).value, -1e-12);
  }
}

TEST(Hsic, MedianBandwidthTranslationInvariant) {
  Rng rng(12);
  const Matrix x = oracle::random_matrix(30, 3, rng);
  const Matrix y = x.col(1).array().square().matrix();
  const double v = hsicwae::hsic_b(hsicwae::rbf_median(x), hsicwae::rbf_median(y), x, y).value;
  const Matrix xs = x.array() + 3.0;
  const Matrix ys = y.array() - 7.0;
  EXPECT_NEAR(hsicwae::hsic_b(hsicwae::rbf_median(xs), hsicwae::rbf_median(ys), xs, ys).value, v, 1e-12);
}

TEST(Hsic, UnpairedRowsRejected) {
  EXPECT_THROW(hsicwae::hsic_b(KernelSpec::imq(), KernelSpec::imq(), Matrix::Zero(3, 1), Matrix::Zero(4, 1)),
               hsicwae::ShapeError);
}

TEST(PermutationTest, IndependentGaussiansAreNotRejected) {
  int accepted = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Matrix x = oracle::random_matrix(100, 1, rng);
    const Matrix y = oracle::random_matrix(100, 1, rng);
    const auto null = hsicwae::permutation_null(hsicwae::rbf_median(x), hsicwae::rbf_median(y), x, y, 200, rng);
    if (null.p_value > 0.05) ++accepted;
  }
  EXPECT_GE(accepted, 16);
}

TEST(PermutationTest, IdenticalSamplesAreRejected) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Matrix x = oracle::random_matrix(100, 1, rng);
    const auto null = hsicwae::permutation_null(hsicwae::rbf_median(x), hsicwae::rbf_median(x), x, x, 200, rng);
    EXPECT_LE(null.p_value, 3.0 / 201.0) << "seed " << seed;
  }
}

TEST(PermutationTest, NullSortedAndPValueInRange) {
  Rng rng(1);
  const Matrix x = oracle::random_matrix(30, 2, rng);
  const Matrix y = oracle::random_matrix(30, 1, rng);
  const auto null = hsicwae::permutation_null(KernelSpec::rbf(1.0), KernelSpec::rbf(1.0), x, y, 60, rng);
  ASSERT_EQ(null.null.size(), 60u);
  EXPECT_TRUE(std::is_sorted(null.null.begin(), null.null.end()));
  EXPECT_GE(null.p_value, 1.0 / 61.0);
  EXPECT_LE(null.p_value, 1.0);
  // Direct count of the p-value definition.
  int at_least = 0;
  for (double v : null.null) at_least += v >= null.observed;
  EXPECT_DOUBLE_EQ(null.p_value, (1.0 + at_least) / 61.0);
  EXPECT_LE(null.quantile(0.0), null.quantile(0.95));
  EXPECT_EQ(null.quantile(1.0), null.null.back());
}

TEST(PermutationTest, NullMatchesRecomputedStatistics) {
  // Each null value is hsic_b on a permuted Y; rebuild them with the same stream.
  Rng a(77), b(77);
  const Matrix x = oracle::random_matrix(12, 2, a);
  const Matrix y = oracle::random_matrix(12, 1, a);
  b = a;
  const KernelSpec k = KernelSpec::rbf(1.0);
  const auto null = hsicwae::permutation_null(k, k, x, y, 50, a);
  std::vector<double> manual;
  for (int i = 0; i < 50; ++i) manual.push_back(hsicwae::hsic_b(k, k, x, hsicwae::permute_rows(y, b.permutation(12))).value);
  std::sort(manual.begin(), manual.end());
  for (std::size_t i = 0; i < manual.size(); ++i) EXPECT_NEAR(null.null[i], manual[i], 1e-12);
}

TEST(PermutationTest, TooFewPermutationsIsAnError) {
  Rng rng(1);
  const Matrix x = oracle::random_matrix(10, 1, rng);
  EXPECT_THROW(hsicwae::permutation_null(KernelSpec::imq(), KernelSpec::imq(), x, x, 0, rng),
               hsicwae::PreconditionError);
  EXPECT_THROW(hsicwae::permutation_null(KernelSpec::imq(), KernelSpec::imq(), x, x, 49, rng),
               hsicwae::PreconditionError);
}

TEST(PermutationTest, MmdNullSeparatesShiftedSamples) {
  Rng rng(5);
  const Matrix x = oracle::random_matrix(40, 2, rng);
  const Matrix y = (oracle::random_matrix(40, 2, rng).array() + 2.0).matrix();
  const auto null = hsicwae::mmd_permutation_null(KernelSpec::imq(), x, y, 100, rng);
  EXPECT_LE(null.p_value, 2.0 / 101.0);
}
