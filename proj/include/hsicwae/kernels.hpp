#pragma once

#include "hsicwae/bandwidth.hpp"
#include "hsicwae/common.hpp"

#include <string>

namespace hsicwae {

// RBF: exp(-||x-y||^2 / (2 sigma^2)). IMQ: 1 / sqrt(||x-y||^2 + 1).
struct KernelSpec {
  enum class Kind { kRbf, kImq };

  Kind kind = Kind::kImq;
  double sigma2 = 1.0;

  static KernelSpec rbf(double sigma2) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
      throw PreconditionError("RBF kernel needs sigma^2 > 0, got " + std::to_string(sigma2));
    }
    return KernelSpec{Kind::kRbf, sigma2};
  }
  static KernelSpec imq() { return KernelSpec{Kind::kImq, 1.0}; }

  double from_sq_dist(double d2) const {
    return kind == Kind::kRbf ? std::exp(-d2 / (2.0 * sigma2)) : 1.0 / std::sqrt(d2 + 1.0);
  }

  std::string name() const { return kind == Kind::kRbf ? "rbf" : "imq"; }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

inline double kernel_eval(const KernelSpec& spec, const Vector& x, const Vector& y) {
  if (x.size() != y.size()) {
    throw ShapeError("kernel_eval: dimension mismatch " + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()));
  }
  return spec.from_sq_dist((x - y).squaredNorm());
}

inline Matrix gram(const KernelSpec& spec, const Matrix& x, const Matrix& y) {
  Matrix g = pairwise_sq_dists(x, y);
  return g.unaryExpr([&spec](double d2) { return spec.from_sq_dist(d2); });
}

inline Matrix gram(const KernelSpec& spec, const Matrix& x) { return gram(spec, x, x); }

// sigma^2 from the median pairwise distance of the rows of x.
inline double median_heuristic(const Matrix& x) {
  if (x.rows() < 2) throw PreconditionError("median_heuristic needs at least 2 rows, got " + std::to_string(x.rows()));
  return median_bandwidth(pairwise_sq_dists(x, x)).sigma2;
}

inline KernelSpec rbf_median(const Matrix& x) { return KernelSpec::rbf(median_heuristic(x)); }

}  // namespace hsicwae
