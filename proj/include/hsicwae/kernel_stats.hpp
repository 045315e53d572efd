#pragma once

#include "hsicwae/kernels.hpp"

#include <algorithm>
#include <vector>

namespace hsicwae {

struct MmdEstimate {
  double value = 0.0;
  Eigen::Index m = 0;
  Eigen::Index n = 0;
  KernelSpec spec;
};

struct HsicEstimate {
  double value = 0.0;
  Eigen::Index n = 0;
  KernelSpec spec_k;
  KernelSpec spec_l;
};

struct PermutationNull {
  std::vector<double> null;  // ascending
  double observed = 0.0;
  double p_value = 1.0;

  // Empirical quantile of the null (linear interpolation between order statistics).
  double quantile(double q) const {
    if (null.empty()) throw PreconditionError("quantile of an empty null distribution");
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(null.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, null.size() - 1);
    return null[lo] + (pos - static_cast<double>(lo)) * (null[hi] - null[lo]);
  }
};

namespace detail {

inline double mmd_from_grams(const Matrix& kxx, const Matrix& kyy, const Matrix& kxy) {
  const auto m = static_cast<double>(kxx.rows());
  const auto n = static_cast<double>(kyy.rows());
  const double xx = (kxx.sum() - kxx.trace()) / (m * (m - 1.0));
  const double yy = (kyy.sum() - kyy.trace()) / (n * (n - 1.0));
  const double xy = kxy.sum() / (m * n);
  return xx + yy - 2.0 * xy;
}

// H K H for H = I - (1/n) 1 1^T.
inline Matrix center(const Matrix& k) {
  const Vector row_mean = k.rowwise().mean();
  const Eigen::RowVectorXd col_mean = k.colwise().mean();
  const double mean = k.mean();
  Matrix c = k;
  c.colwise() -= row_mean;
  c.rowwise() -= col_mean;
  c.array() += mean;
  return c;
}

inline PermutationNull finish_null(std::vector<double> null, double observed) {
  std::sort(null.begin(), null.end());
  const auto exceed = static_cast<double>(
      null.end() - std::lower_bound(null.begin(), null.end(), observed));
  PermutationNull out;
  out.p_value = (1.0 + exceed) / (static_cast<double>(null.size()) + 1.0);
  out.null = std::move(null);
  out.observed = observed;
  return out;
}

}  // namespace detail

// Unbiased quadratic-time MMD^2. May be negative.
inline MmdEstimate mmd_u_sq(const KernelSpec& spec, const Matrix& x, const Matrix& y) {
  if (x.rows() < 2 || y.rows() < 2) {
    throw PreconditionError("mmd_u_sq needs at least 2 samples per set, got m=" + std::to_string(x.rows()) +
                            ", n=" + std::to_string(y.rows()));
  }
  if (x.cols() != y.cols()) {
    throw ShapeError("mmd_u_sq: column mismatch " + std::to_string(x.cols()) + " vs " + std::to_string(y.cols()));
  }
  MmdEstimate est;
  est.value = detail::mmd_from_grams(gram(spec, x), gram(spec, y), gram(spec, x, y));
  est.m = x.rows();
  est.n = y.rows();
  est.spec = spec;
  return est;
}

// Biased HSIC, (1/n^2) tr(K H L H), evaluated as the sum of (H K H) o L.
inline HsicEstimate hsic_b(const KernelSpec& spec_k, const KernelSpec& spec_l, const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) {
    throw ShapeError("hsic_b: row mismatch " + std::to_string(x.rows()) + " vs " + std::to_string(y.rows()));
  }
  if (x.rows() < 2) throw PreconditionError("hsic_b needs n >= 2");
  const auto n = static_cast<double>(x.rows());
  const Matrix kc = detail::center(gram(spec_k, x));
  const Matrix l = gram(spec_l, y);
  HsicEstimate est;
  est.value = kc.cwiseProduct(l).sum() / (n * n);
  est.n = x.rows();
  est.spec_k = spec_k;
  est.spec_l = spec_l;
  return est;
}

// HSIC_b under B random re-pairings of the rows of y.
inline PermutationNull permutation_null(const KernelSpec& spec_k, const KernelSpec& spec_l, const Matrix& x,
                                        const Matrix& y, int permutations, Rng& rng) {
  if (permutations < 50) throw PreconditionError("permutation_null needs B >= 50, got " + std::to_string(permutations));
  if (x.rows() != y.rows()) {
    throw ShapeError("permutation_null: row mismatch " + std::to_string(x.rows()) + " vs " + std::to_string(y.rows()));
  }
  if (x.rows() < 2) throw PreconditionError("permutation_null needs n >= 2");
  const Eigen::Index n = x.rows();
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  const Matrix kc = detail::center(gram(spec_k, x));
  const Matrix l = gram(spec_l, y);
  const double observed = kc.cwiseProduct(l).sum() * scale;

  std::vector<double> null;
  null.reserve(static_cast<std::size_t>(permutations));
  for (int b = 0; b < permutations; ++b) {
    const auto perm = rng.permutation(n);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index pj = perm[static_cast<std::size_t>(j)];
      for (Eigen::Index i = 0; i < n; ++i) acc += kc(i, j) * l(perm[static_cast<std::size_t>(i)], pj);
    }
    null.push_back(acc * scale);
  }
  return detail::finish_null(std::move(null), observed);
}

// Two-sample permutation test for MMD^2: the pooled sample is re-split B times.
inline PermutationNull mmd_permutation_null(const KernelSpec& spec, const Matrix& x, const Matrix& y,
                                            int permutations, Rng& rng) {
  if (permutations < 50) throw PreconditionError("mmd permutation test needs B >= 50, got " + std::to_string(permutations));
  const double observed = mmd_u_sq(spec, x, y).value;
  const Eigen::Index m = x.rows();
  const Eigen::Index total = x.rows() + y.rows();
  Matrix pooled(total, x.cols());
  pooled << x, y;
  const Matrix k = gram(spec, pooled);
  std::vector<double> null;
  null.reserve(static_cast<std::size_t>(permutations));
  for (int b = 0; b < permutations; ++b) {
    const auto perm = rng.permutation(total);
    Matrix kp(total, total);
    for (Eigen::Index j = 0; j < total; ++j) {
      for (Eigen::Index i = 0; i < total; ++i) kp(i, j) = k(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    null.push_back(detail::mmd_from_grams(kp.topLeftCorner(m, m), kp.bottomRightCorner(total - m, total - m),
                                          kp.topRightCorner(m, total - m)));
  }
  return detail::finish_null(std::move(null), observed);
}

}  // namespace hsicwae
