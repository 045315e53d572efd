#pragma once

#include "hsicwae/bandwidth.hpp"
#include "hsicwae/common.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace hsicwae::eval {

inline double mean(const Vector& v) { return v.mean(); }

// Pearson correlation; 0 when either side has zero variance.
inline double pearson(const Vector& x, const Vector& y) {
  const Vector xc = x.array() - x.mean();
  const Vector yc = y.array() - y.mean();
  const double sxx = xc.squaredNorm();
  const double syy = yc.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return xc.dot(yc) / std::sqrt(sxx * syy);
}

// 1-based ranks; ties share their average rank.
inline Vector average_ranks(const Vector& v) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&v](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
  Vector ranks(n);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v(order[j + 1]) == v(order[i])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks(order[t]) = avg;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(const Vector& x, const Vector& y) { return pearson(average_ranks(x), average_ranks(y)); }

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double pearson_r = 0.0;
};

// Ordinary least squares y ~ slope * x + intercept. With constant x the slope
// is 0 and the intercept is mean(y).
inline LinearFit ols(const Vector& x, const Vector& y) {
  LinearFit fit;
  const double mx = x.mean();
  const double my = y.mean();
  const Vector xc = x.array() - mx;
  const double sxx = xc.squaredNorm();
  fit.slope = sxx > 0.0 ? xc.dot(y.array().matrix() - Vector::Constant(y.size(), my)) / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  fit.pearson_r = pearson(x, y);
  return fit;
}

// ---- nearest-neighbor side-info regression ----------------------------------

enum class RegressionMode { kPooled, kAveraged };

inline std::string mode_name(RegressionMode m) { return m == RegressionMode::kPooled ? "pooled" : "averaged"; }

struct NnRegressionReport {
  int k = 0;
  RegressionMode mode = RegressionMode::kPooled;
  std::vector<double> z_dep;                          // per generated sample
  std::vector<std::vector<Eigen::Index>> neighbors;   // k test indices each
  std::vector<std::vector<double>> neighbor_s;        // their side info
  LinearFit fit;

  // (z_dep, neighbor_s) pairs, k per generated sample.
  Matrix pairs() const {
    Matrix out(static_cast<Eigen::Index>(z_dep.size()) * k, 2);
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < z_dep.size(); ++i) {
      for (double s : neighbor_s[i]) {
        out(r, 0) = z_dep[i];
        out(r, 1) = s;
        ++r;
      }
    }
    return out;
  }
};

// Draws n_gen latent codes from the prior, decodes them, finds the k nearest
// test images (squared L2) of each, and regresses neighbor side info on the
// generating Z_dep. `decoder` maps an n x d_z matrix to n x d_x images.
template <typename Decoder>
NnRegressionReport nn_regress(Decoder&& decoder, Eigen::Index d_z, const Matrix& test_images, const Matrix& test_s,
                              int k, int n_gen, Rng& rng, RegressionMode mode = RegressionMode::kPooled) {
  if (test_images.rows() == 0) throw PreconditionError("nn_regress: empty test set");
  if (test_s.rows() != test_images.rows()) throw ShapeError("nn_regress: test images and side info are not paired");
  if (k < 1) throw PreconditionError("nn_regress: k must be >= 1");
  if (k > test_images.rows()) {
    throw PreconditionError("nn_regress: k=" + std::to_string(k) + " exceeds test-set size " +
                            std::to_string(test_images.rows()));
  }
  if (n_gen < 10) throw PreconditionError("nn_regress: n_gen must be >= 10");
  if (d_z < 1) throw PreconditionError("nn_regress: d_z must be >= 1");

  Matrix z(n_gen, d_z);
  for (Eigen::Index i = 0; i < n_gen; ++i) {
    for (Eigen::Index j = 0; j < d_z; ++j) z(i, j) = rng.normal();
  }
  const Matrix generated = decoder(z);
  if (generated.rows() != n_gen || generated.cols() != test_images.cols()) {
    throw ShapeError("nn_regress: decoder output " + shape_str(generated.rows(), generated.cols()) +
                     " does not match test images width " + std::to_string(test_images.cols()));
  }
  const Matrix d2 = pairwise_sq_dists(generated, test_images);

  NnRegressionReport rep;
  rep.k = k;
  rep.mode = mode;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(test_images.rows()));
  for (Eigen::Index i = 0; i < n_gen; ++i) {
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    const auto closer = [&](Eigen::Index a, Eigen::Index b) {
      return d2(i, a) != d2(i, b) ? d2(i, a) < d2(i, b) : a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), closer);
    rep.z_dep.push_back(z(i, 0));
    rep.neighbors.emplace_back(idx.begin(), idx.begin() + k);
    std::vector<double> s;
    for (int t = 0; t < k; ++t) s.push_back(test_s(idx[static_cast<std::size_t>(t)], 0));
    rep.neighbor_s.push_back(std::move(s));
  }

  if (mode == RegressionMode::kPooled) {
    const Matrix p = rep.pairs();
    rep.fit = ols(p.col(0), p.col(1));
  } else {
    Vector x(n_gen);
    Vector y(n_gen);
    for (Eigen::Index i = 0; i < n_gen; ++i) {
      const auto& s = rep.neighbor_s[static_cast<std::size_t>(i)];
      x(i) = rep.z_dep[static_cast<std::size_t>(i)];
      y(i) = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    }
    rep.fit = ols(x, y);
  }
  return rep;
}

// ---- first principal component ----------------------------------------------

struct PrincipalComponent {
  Vector direction;    // unit norm
  Vector projections;  // centered rows projected on direction
  bool degenerate = false;
  int iterations = 0;
};

// Power iteration on the covariance. Stops when the direction moves less than
// 1e-10 or after 1000 iterations. The largest-magnitude component is made
// positive. Zero covariance returns the first coordinate axis.
inline PrincipalComponent first_pc(const Matrix& z) {
  if (z.rows() < 2 || z.cols() < 1) throw PreconditionError("first_pc needs at least 2 rows and 1 column");
  const Matrix centered = z.rowwise() - z.colwise().mean();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(z.rows() - 1);

  PrincipalComponent pc;
  Eigen::Index start = 0;
  const double best = cov.colwise().norm().maxCoeff(&start);
  if (best == 0.0) {
    pc.direction = Vector::Unit(z.cols(), 0);
    pc.degenerate = true;
  } else {
    Vector v = cov.col(start) / best;
    for (pc.iterations = 1; pc.iterations <= 1000; ++pc.iterations) {
      Vector next = cov * v;
      const double norm = next.norm();
      if (norm == 0.0) break;
      next /= norm;
      const double moved = (next - v).norm();
      v = std::move(next);
      if (moved < 1e-10) break;
    }
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    pc.direction = v;
  }
  pc.projections = centered * pc.direction;
  return pc;
}

// ---- per-level kernel density ------------------------------------------------

struct KdeCurve {
  double level = 0.0;
  Eigen::Index count = 0;
  double bandwidth = 0.0;
  Vector grid;
  Vector density;
};

struct KdeResult {
  std::vector<KdeCurve> curves;
  std::vector<std::string> warnings;
};

// Gaussian KDE for each distinct label, Silverman bandwidth
// 1.06 * sd * n^(-1/5). Zero spread falls back to 1e-3 * grid span; labels
// with fewer than 2 points are skipped with a warning.
inline KdeResult kde_1d(const Vector& values, const Vector& labels, const Vector& grid) {
  if (values.size() != labels.size()) throw ShapeError("kde_1d: values and labels are not paired");
  if (grid.size() < 1) throw PreconditionError("kde_1d: empty grid");
  std::map<double, std::vector<double>> groups;
  for (Eigen::Index i = 0; i < values.size(); ++i) groups[labels(i)].push_back(values(i));

  KdeResult out;
  const double span = grid.maxCoeff() - grid.minCoeff();
  for (auto& [level, pts] : groups) {
    if (pts.size() < 2) {
      out.warnings.push_back("level " + std::to_string(level) + " has " + std::to_string(pts.size()) +
                             " point(s); density skipped");
      continue;
    }
    // Sorted so the summation order does not depend on input order.
    std::sort(pts.begin(), pts.end());
    // Plain sequential sums: vectorized reductions over a Map depend on the
    // buffer's alignment, which would break bit-level permutation invariance.
    const double n = static_cast<double>(pts.size());
    const double mu = std::accumulate(pts.begin(), pts.end(), 0.0) / n;
    double ss = 0.0;
    for (double p : pts) ss += (p - mu) * (p - mu);
    const double sd = std::sqrt(ss / (n - 1.0));
    double h = 1.06 * sd * std::pow(n, -0.2);
    if (!(h > 0.0)) h = 1e-3 * (span > 0.0 ? span : 1.0);
    KdeCurve c;
    c.level = level;
    c.count = static_cast<Eigen::Index>(pts.size());
    c.bandwidth = h;
    c.grid = grid;
    c.density.resize(grid.size());
    const double norm = 1.0 / (n * h * std::sqrt(2.0 * M_PI));
    for (Eigen::Index g = 0; g < grid.size(); ++g) {
      double acc = 0.0;
      for (double p : pts) {
        const double u = (grid(g) - p) / h;
        acc += std::exp(-0.5 * u * u);
      }
      c.density(g) = acc * norm;
    }
    out.curves.push_back(std::move(c));
  }
  return out;
}

// Evenly spaced grid covering the data plus `pad` on both sides.
inline Vector padded_grid(const Vector& values, double pad, Eigen::Index points) {
  if (points < 2) throw PreconditionError("grid needs at least 2 points");
  const double lo = values.minCoeff() - pad;
  const double hi = values.maxCoeff() + pad;
  return Vector::LinSpaced(points, lo, hi == lo ? lo + 1.0 : hi);
}

// ---- per-axis correlations --------------------------------------------------

struct AxisCorrelation {
  Eigen::Index axis = 0;
  double pearson = 0.0;
  double spearman = 0.0;
  bool zero_variance = false;
};

inline std::vector<AxisCorrelation> correlations(const Matrix& z, const Vector& s) {
  if (z.rows() != s.size()) throw ShapeError("correlations: latent rows and side info are not paired");
  if (z.rows() < 3) throw PreconditionError("correlations need n >= 3");
  std::vector<AxisCorrelation> out;
  for (Eigen::Index a = 0; a < z.cols(); ++a) {
    AxisCorrelation c;
    c.axis = a;
    const Vector col = z.col(a);
    c.zero_variance = (col.array() == col(0)).all();
    if (!c.zero_variance) {
      c.pearson = pearson(col, s);
      c.spearman = spearman(col, s);
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace hsicwae::eval
