#pragma once

#include "hsicwae/common.hpp"
#include "hsicwae/mlp.hpp"

namespace hsicwae {

struct AdamConfig {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moments laid out like MlpParams (weight moments in `weight`, bias moments in `bias`).
struct AdamState {
  AdamConfig config;
  MlpParams m;
  MlpParams v;
  long t = 0;

  static AdamState zeros_like(const MlpParams& params, AdamConfig config = {}) {
    AdamState s;
    s.config = config;
    s.m = params;
    for (Layer& l : s.m.layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
    s.v = s.m;
    return s;
  }
};

namespace detail {

template <typename Param, typename Grad, typename Moment>
void adam_update(Eigen::DenseBase<Param>& x, const Eigen::DenseBase<Grad>& g, Eigen::DenseBase<Moment>& m,
                 Eigen::DenseBase<Moment>& v, const AdamConfig& c, double m_corr, double v_corr) {
  m.derived().array() = c.beta1 * m.derived().array() + (1.0 - c.beta1) * g.derived().array();
  v.derived().array() = c.beta2 * v.derived().array() + (1.0 - c.beta2) * g.derived().array().square();
  x.derived().array() -= c.alpha * (m.derived().array() / m_corr) /
                         ((v.derived().array() / v_corr).sqrt() + c.epsilon);
}

inline bool same_shape(const MlpParams& a, const MlpParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].weight.rows() != b.layers[i].weight.rows() ||
        a.layers[i].weight.cols() != b.layers[i].weight.cols() ||
        a.layers[i].bias.size() != b.layers[i].bias.size()) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

// One bias-corrected Adam step; increments state.t.
inline void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state) {
  if (!detail::same_shape(params, grads) || !detail::same_shape(params, state.m) ||
      !detail::same_shape(params, state.v)) {
    throw ShapeError("adam_step: parameter, gradient and moment shapes disagree");
  }
  if (state.t < 0) throw PreconditionError("adam_step: negative step counter");
  ++state.t;
  const AdamConfig& c = state.config;
  const double m_corr = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double v_corr = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    detail::adam_update(params.layers[i].weight, grads.layers[i].weight, state.m.layers[i].weight,
                        state.v.layers[i].weight, c, m_corr, v_corr);
    detail::adam_update(params.layers[i].bias, grads.layers[i].bias, state.m.layers[i].bias, state.v.layers[i].bias,
                        c, m_corr, v_corr);
  }
}

}  // namespace hsicwae
