#pragma once

// Finite-difference check of the full training objective, shared by the unit
// tests and the acceptance binary.

#include "hsicwae/wae.hpp"

#include "oracles.hpp"

#include <limits>

namespace gradcheck {

using hsicwae::Matrix;
using hsicwae::WaeModel;

// Smallest |pre-activation| feeding a leaky ReLU anywhere in the model. Central
// differences are meaningless when a step of h can cross the kink.
inline double kink_margin(const WaeModel& m, const Matrix& x) {
  double margin = std::numeric_limits<double>::infinity();
  Matrix h = x;
  for (const auto* net : {&m.encoder, &m.decoder}) {
    for (const auto& l : net->layers) {
      Matrix pre = h * l.weight.transpose();
      pre.rowwise() += l.bias.transpose();
      if (l.activation == hsicwae::Activation::kLeakyRelu) margin = std::min(margin, pre.cwiseAbs().minCoeff());
      h = hsicwae::apply_activation(l.activation, pre);
    }
  }
  return margin;
}

inline hsicwae::TrainingConfig config(Eigen::Index d_z = 4) {
  hsicwae::TrainingConfig c;
  c.d_z = d_z;
  c.encoder_hidden = {6};
  c.decoder_hidden = {6};
  c.batch_size = 8;
  c.lambda1 = 10.0;
  c.lambda2 = 50.0;
  c.lambda3 = 20.0;
  return c;
}

// Largest relative error between backprop and central differences over every
// encoder and decoder parameter, for a random batch of 8 with d_z = 4.
// Instances with a pre-activation within 1e-3 of a ReLU kink are redrawn.
inline double max_loss_gradient_error(std::uint64_t seed) {
  hsicwae::Rng rng(seed * 101);
  const hsicwae::TrainingConfig c = config(4);
  const Eigen::Index n = 8, d_x = 6;
  WaeModel m;
  Matrix s(n, 1), x(n, d_x);
  do {
    m = hsicwae::init_model(c, d_x, rng);
    for (auto* net : {&m.encoder, &m.decoder})
      for (auto& l : net->layers) l.bias = oracle::random_matrix(l.bias.size(), 1, rng, 0.1);
    for (Eigen::Index i = 0; i < n; ++i) s(i, 0) = 1.0 + static_cast<double>(rng.below(5));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d_x; ++j) x(i, j) = 0.1 * s(i, 0) + 0.2 * rng.uniform();
  } while (kink_margin(m, x) < 1e-3);
  const Matrix prior = hsicwae::prior_sample(n, c.d_z, rng);

  hsicwae::LossGraph loss(c, m.encoder, m.decoder, n);
  loss.evaluate(m, x, s, prior);
  const WaeModel grads = loss.gradients(m);
  const auto f = [&] { return loss.evaluate(m, x, s, prior).total; };
  double worst = 0.0;
  for (int net = 0; net < 2; ++net) {
    auto& params = net == 0 ? m.encoder : m.decoder;
    const auto& g = net == 0 ? grads.encoder : grads.decoder;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
      worst = std::max(worst,
                       oracle::max_rel_error(g.layers[i].weight, oracle::central_diff(params.layers[i].weight, f)));
      Matrix b = params.layers[i].bias;
      const Matrix nb = oracle::central_diff(b, [&] {
        params.layers[i].bias = b;
        return f();
      });
      params.layers[i].bias = b;
      worst = std::max(worst, oracle::max_rel_error(g.layers[i].bias, nb));
    }
  }
  return worst;
}

}  // namespace gradcheck
