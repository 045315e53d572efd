#pragma once

#include "hsicwae/common.hpp"

#include <algorithm>

namespace hsicwae {

// Result of the median trick on a squared-distance matrix. `picks` lists the
// entries (i < j) that determine sigma^2 together with d(sigma^2)/d(D_ij),
// which lets the autodiff graph differentiate through the bandwidth.
struct BandwidthPick {
  double sigma2 = 1.0;
  struct Entry {
    Eigen::Index row;
    Eigen::Index col;
    double weight;
  };
  std::vector<Entry> picks;
};

// sigma = median of Euclidean distances over pairs i < j; sigma^2 returned.
// Even count uses the mean of the two middle values. A zero median falls back
// to the smallest nonzero distance; all-zero distances give sigma^2 = 1.
inline BandwidthPick median_bandwidth(const Matrix& sq_dists) {
  const Eigen::Index n = sq_dists.rows();
  if (n < 2 || sq_dists.cols() != n) {
    throw PreconditionError("median bandwidth needs a square distance matrix with n >= 2, got " +
                            shape_str(sq_dists.rows(), sq_dists.cols()));
  }
  struct Pair {
    double dist;
    Eigen::Index row;
    Eigen::Index col;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      pairs.push_back({std::sqrt(std::max(sq_dists(i, j), 0.0)), i, j});
    }
  }
  const auto by_dist = [](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  };
  const std::size_t count = pairs.size();
  const std::size_t upper = count / 2;
  std::nth_element(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(upper), pairs.end(), by_dist);
  const Pair hi = pairs[upper];

  BandwidthPick out;
  double median = hi.dist;
  if (count % 2 == 0) {
    const Pair lo = *std::max_element(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(upper), by_dist);
    median = 0.5 * (lo.dist + hi.dist);
    if (median > 0.0) {
      out.sigma2 = median * median;
      // sigma^2 = ((sqrt(Da) + sqrt(Db)) / 2)^2
      for (const Pair& p : {lo, hi}) {
        if (p.dist > 0.0) out.picks.push_back({p.row, p.col, median / (2.0 * p.dist)});
      }
      return out;
    }
  } else if (median > 0.0) {
    out.sigma2 = median * median;
    out.picks.push_back({hi.row, hi.col, 1.0});
    return out;
  }

  const Pair* smallest = nullptr;
  for (const Pair& p : pairs) {
    if (p.dist > 0.0 && (smallest == nullptr || by_dist(p, *smallest))) smallest = &p;
  }
  if (smallest == nullptr) {
    out.sigma2 = 1.0;
    return out;
  }
  out.sigma2 = smallest->dist * smallest->dist;
  out.picks.push_back({smallest->row, smallest->col, 1.0});
  return out;
}

// Squared Euclidean distances between the rows of a and the rows of b.
inline Matrix pairwise_sq_dists(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("pairwise distance: column mismatch " + shape_str(a.rows(), a.cols()) + " vs " +
                     shape_str(b.rows(), b.cols()));
  }
  // Columns are contiguous, so work on transposed copies.
  const Matrix at = a.transpose();
  const Matrix bt = b.transpose();
  Matrix out(a.rows(), b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      out(i, j) = (at.col(i) - bt.col(j)).squaredNorm();
    }
  }
  return out;
}

}  // namespace hsicwae
