#include "hsicwae/eval.hpp"
#include "hsicwae/synthdata.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using hsicwae::Matrix;
using hsicwae::Rng;
using hsicwae::Vector;
namespace ev = hsicwae::eval;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Renders a centered blob whose size follows z_dep over the level range.
struct PlantedDecoder {
  hsicwae::synth::SyntheticSpec spec;
  Matrix operator()(const Matrix& z) const {
    Matrix out(z.rows(), spec.side * spec.side);
    const double mid = 0.5 * (spec.levels + 1);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      const double level = std::clamp(mid + z(i, 0), 1.0, static_cast<double>(spec.levels));
      // Circle with the mean area of the level's ellipses (eccentricity ~ U[0.5, 1]).
      const double r = (spec.radius(1) + spec.radius_slope * (level - 1.0)) * std::sqrt(0.87);
      out.row(i) = hsicwae::synth::render_ellipse(spec.side, 0.5 * spec.side, 0.5 * spec.side, r, r, 0.0).transpose();
    }
    return out;
  }
};

}  // namespace

TEST(Correlation, AffineIsPerfect) {
  const Vector s = vec({1, 2, 3, 4, 5, 2, 3});
  const Matrix z = (2.0 * s.array() + 1.0).matrix();
  const auto c = ev::correlations(z, s);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c[0].pearson, 1.0, 1e-15);
  EXPECT_NEAR(c[0].spearman, 1.0, 1e-15);
}

TEST(Correlation, IndependentNoiseIsWeak) {
  Rng rng(4);
  const Matrix z = oracle::random_matrix(1000, 1, rng);
  const Matrix s = oracle::random_matrix(1000, 1, rng);
  EXPECT_LT(std::abs(ev::correlations(z, s.col(0))[0].pearson), 0.1);
}

TEST(Correlation, ConstantAxisFlagged) {
  Matrix z(4, 2);
  z << 1, 3, 2, 3, 3, 3, 4, 3;
  const auto c = ev::correlations(z, vec({1, 2, 3, 4}));
  EXPECT_FALSE(c[0].zero_variance);
  EXPECT_TRUE(c[1].zero_variance);
  EXPECT_EQ(c[1].pearson, 0.0);
  EXPECT_EQ(c[1].spearman, 0.0);
}

TEST(Correlation, SpearmanInvariantToMonotoneTransform) {
  Rng rng(2);
  const Matrix z = oracle::random_matrix(50, 3, rng);
  Vector s(50);
  for (Eigen::Index i = 0; i < 50; ++i) s(i) = 1.0 + static_cast<double>(rng.below(5));
  const Vector t = s.unaryExpr([](double v) { return 3.0 * std::exp(v) - 7.0; });
  const auto a = ev::correlations(z, s);
  const auto b = ev::correlations(z, t);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].spearman, b[i].spearman);
}

TEST(Correlation, AverageRanksForTies) {
  const Vector r = ev::average_ranks(vec({10, 20, 10, 30, 20}));
  EXPECT_EQ(r, vec({1.5, 3.5, 1.5, 5, 3.5}));
}

TEST(Ols, ConstantResponseAndExactLine) {
  const Vector x = vec({0, 1, 2, 3});
  const auto flat = ev::ols(x, vec({4, 4, 4, 4}));
  EXPECT_EQ(flat.slope, 0.0);
  EXPECT_EQ(flat.intercept, 4.0);
  const auto line = ev::ols(x, vec({1, 3, 5, 7}));
  EXPECT_NEAR(line.slope, 2.0, 1e-15);
  EXPECT_NEAR(line.intercept, 1.0, 1e-15);
  EXPECT_NEAR(line.pearson_r, 1.0, 1e-15);
}

TEST(NnRegress, ConstantSideInfoGivesFlatFit) {
  Rng rng(1);
  const Matrix test = oracle::random_matrix(12, 4, rng);
  const Matrix s = Matrix::Constant(12, 1, 3.0);
  const auto rep = ev::nn_regress([&](const Matrix& z) { return Matrix(z.leftCols(4)); }, 4, test, s, 3, 20, rng);
  EXPECT_EQ(rep.fit.slope, 0.0);
  EXPECT_EQ(rep.fit.intercept, 3.0);
  EXPECT_EQ(rep.pairs().rows(), 60);
}

TEST(NnRegress, NeighborsAreTheClosestTestRows) {
  Rng rng(3);
  const Matrix test = oracle::random_matrix(15, 2, rng);
  Matrix s(15, 1);
  for (Eigen::Index i = 0; i < 15; ++i) s(i, 0) = static_cast<double>(i);
  Matrix generated;
  const auto rep = ev::nn_regress(
      [&generated](const Matrix& z) {
        generated = z;
        return z;
      },
      2, test, s, 3, 10, rng, ev::RegressionMode::kAveraged);
  for (Eigen::Index g = 0; g < 10; ++g) {
    std::vector<std::pair<double, Eigen::Index>> d;
    for (Eigen::Index j = 0; j < 15; ++j) d.push_back({oracle::sq_dist(generated, g, test, j), j});
    std::sort(d.begin(), d.end());
    const auto& nb = rep.neighbors[static_cast<std::size_t>(g)];
    for (std::size_t t = 0; t < 3; ++t) {
      EXPECT_EQ(nb[t], d[t].second);
      EXPECT_EQ(rep.neighbor_s[static_cast<std::size_t>(g)][t], s(d[t].second, 0));
    }
    EXPECT_EQ(rep.z_dep[static_cast<std::size_t>(g)], generated(g, 0));
  }
}

TEST(NnRegress, Preconditions) {
  Rng rng(1);
  const Matrix test = Matrix::Zero(2, 3);
  const Matrix s = Matrix::Zero(2, 1);
  const auto dec = [](const Matrix& z) { return z; };
  EXPECT_THROW(ev::nn_regress(dec, 3, test, s, 3, 20, rng), hsicwae::PreconditionError);  // k > n_test
  EXPECT_THROW(ev::nn_regress(dec, 3, test, s, 0, 20, rng), hsicwae::PreconditionError);
  EXPECT_THROW(ev::nn_regress(dec, 3, test, s, 1, 5, rng), hsicwae::PreconditionError);
  EXPECT_THROW(ev::nn_regress(dec, 3, test, Matrix::Zero(3, 1), 1, 20, rng), hsicwae::ShapeError);
  EXPECT_THROW(ev::nn_regress(dec, 2, test, s, 1, 20, rng), hsicwae::ShapeError);  // width mismatch
}

TEST(NnRegress, PlantedRadiusDecoderRecoversSideInfo) {
  hsicwae::synth::SyntheticSpec spec;
  spec.samples_per_level = 100;
  spec.seed = 11;
  const auto ds = hsicwae::synth::generate(spec);
  const Matrix test = ds.test_images();
  const Matrix s = ds.test_levels();
  Rng rng(5);
  const auto rep = ev::nn_regress(PlantedDecoder{spec}, 4, test, s, 3, 200, rng);
  EXPECT_GT(rep.fit.pearson_r, 0.9);
  EXPECT_GT(rep.fit.slope, 0.0);
  // Same sign as the direct correlation view on the planted data.
  Vector zs(static_cast<Eigen::Index>(rep.z_dep.size()));
  Vector mean_s(zs.size());
  for (Eigen::Index i = 0; i < zs.size(); ++i) {
    zs(i) = rep.z_dep[static_cast<std::size_t>(i)];
    const auto& n = rep.neighbor_s[static_cast<std::size_t>(i)];
    mean_s(i) = (n[0] + n[1] + n[2]) / 3.0;
  }
  EXPECT_GT(ev::correlations(Matrix(zs), mean_s)[0].spearman, 0.0);
}

TEST(FirstPc, LineData) {
  Matrix z(20, 2);
  for (int i = 0; i < 20; ++i) {
    const double t = -(i - 9.5);
    z(i, 0) = 0.6 * t;
    z(i, 1) = 0.8 * t;
  }
  const auto pc = ev::first_pc(z);
  EXPECT_NEAR(pc.direction(0), 0.6, 1e-9);
  EXPECT_NEAR(pc.direction(1), 0.8, 1e-9);
  EXPECT_NEAR(pc.direction.norm(), 1.0, 1e-12);
}

TEST(FirstPc, SingleColumn) {
  Rng rng(2);
  const auto pc = ev::first_pc(oracle::random_matrix(10, 1, rng));
  EXPECT_EQ(pc.direction.size(), 1);
  EXPECT_EQ(pc.direction(0), 1.0);
}

TEST(FirstPc, MaximizesProjectedVariance) {
  Rng rng(6);
  Matrix z = oracle::random_matrix(300, 4, rng);
  z.col(2) *= 2.0;
  z.col(0) += 0.5 * z.col(2);
  const auto pc = ev::first_pc(z);
  const Matrix c = z.rowwise() - z.colwise().mean();
  const double best = (c * pc.direction).squaredNorm();
  for (int t = 0; t < 100; ++t) {
    Vector u = oracle::random_matrix(4, 1, rng);
    u.normalize();
    EXPECT_GE(best, (c * u).squaredNorm() - 1e-8);
  }
}

TEST(FirstPc, ZeroCovarianceIsDegenerate) {
  const auto pc = ev::first_pc(Matrix::Constant(5, 3, 2.0));
  EXPECT_TRUE(pc.degenerate);
  EXPECT_EQ(pc.direction, Vector::Unit(3, 0));
  EXPECT_THROW(ev::first_pc(Matrix::Zero(1, 3)), hsicwae::PreconditionError);
}

TEST(Kde, StandardNormalMatchesDensity) {
  Rng rng(10);
  const Vector v = oracle::random_matrix(2000, 1, rng);
  const Vector grid = Vector::LinSpaced(161, -4.0, 4.0);
  const auto res = ev::kde_1d(v, Vector::Zero(2000), grid);
  ASSERT_EQ(res.curves.size(), 1u);
  double worst = 0.0;
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double truth = std::exp(-0.5 * grid(g) * grid(g)) / std::sqrt(2.0 * M_PI);
    worst = std::max(worst, std::abs(res.curves[0].density(g) - truth));
  }
  EXPECT_LT(worst, 0.05);
}

TEST(Kde, CurvesIntegrateToOneAndAreNonNegative) {
  Rng rng(11);
  const Vector v = oracle::random_matrix(300, 1, rng);
  Vector labels(300);
  for (Eigen::Index i = 0; i < 300; ++i) labels(i) = static_cast<double>(i % 3);
  const Vector grid = ev::padded_grid(v, 6.0, 2001);
  const auto res = ev::kde_1d(v, labels, grid);
  ASSERT_EQ(res.curves.size(), 3u);
  for (const auto& c : res.curves) {
    EXPECT_TRUE((c.density.array() >= 0.0).all());
    double integral = 0.0;
    for (Eigen::Index g = 1; g < grid.size(); ++g)
      integral += 0.5 * (c.density(g) + c.density(g - 1)) * (grid(g) - grid(g - 1));
    EXPECT_NEAR(integral, 1.0, 1e-3) << "level " << c.level;
  }
}

TEST(Kde, IdenticalPointsUseSpanFallback) {
  const Vector grid = Vector::LinSpaced(201, 0.0, 2.0);
  const auto res = ev::kde_1d(vec({1.0, 1.0}), vec({0, 0}), grid);
  ASSERT_EQ(res.curves.size(), 1u);
  EXPECT_DOUBLE_EQ(res.curves[0].bandwidth, 2e-3);
  Eigen::Index peak = 0;
  res.curves[0].density.maxCoeff(&peak);
  EXPECT_EQ(peak, 100);
}

TEST(Kde, TailsBelowNearestDataPoint) {
  Rng rng(12);
  const Vector v = oracle::random_matrix(50, 1, rng);
  const double lo = v.minCoeff(), hi = v.maxCoeff();
  Vector grid(4);
  grid << lo, lo - 1.0, hi, hi + 2.0;
  const auto d = ev::kde_1d(v, Vector::Zero(50), grid).curves[0].density;
  EXPECT_LE(d(1), d(0));
  EXPECT_LE(d(3), d(2));
}

TEST(Kde, SingletonLevelSkippedWithWarning) {
  const auto res = ev::kde_1d(vec({0.0, 1.0, 2.0}), vec({1, 1, 2}), Vector::LinSpaced(10, -1, 3));
  EXPECT_EQ(res.curves.size(), 1u);
  EXPECT_EQ(res.warnings.size(), 1u);
}

TEST(Kde, PermutationInvariant) {
  Rng rng(13);
  const Vector v = oracle::random_matrix(60, 1, rng);
  Vector labels(60);
  for (Eigen::Index i = 0; i < 60; ++i) labels(i) = static_cast<double>(i % 4);
  const auto perm = rng.permutation(60);
  const Vector pv = hsicwae::permute_rows(v, perm);
  const Vector pl = hsicwae::permute_rows(labels, perm);
  const Vector grid = ev::padded_grid(v, 1.0, 50);
  const auto a = ev::kde_1d(v, labels, grid);
  const auto b = ev::kde_1d(pv, pl, grid);
  for (std::size_t i = 0; i < a.curves.size(); ++i) EXPECT_EQ(a.curves[i].density, b.curves[i].density);
}
