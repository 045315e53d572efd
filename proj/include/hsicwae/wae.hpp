#pragma once

// HSIC-regularized Wasserstein auto-encoder:
//   total = recon + l1 * MMD(Q_Z, P_Z) + l2 * HSIC(Z_ind, S) - l3 * HSIC(Z_dep, S)
// with a deterministic MLP encoder/decoder, IMQ kernel for MMD and
// median-trick RBF kernels for HSIC. Z_dep is latent column 0.

#include "hsicwae/adam.hpp"
#include "hsicwae/autodiff.hpp"
#include "hsicwae/kernels.hpp"
#include "hsicwae/mlp.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hsicwae {

// Which axes the penalized HSIC term sees. kAllAxes applies it to the whole
// latent code (the single-regularizer objective; requires lambda3 = 0).
enum class Regularizer { kDisentangle, kAllAxes };

struct BandwidthPolicy {
  enum class Kind { kPerBatchMedian, kFrozen };
  Kind kind = Kind::kPerBatchMedian;
  double latent_sigma2 = 1.0;  // frozen mode only
  double side_sigma2 = 1.0;    // frozen mode only
};

struct TrainingConfig {
  std::string preset = "synthetic";
  Eigen::Index d_z = 8;
  std::vector<Eigen::Index> encoder_hidden{128, 64};
  std::vector<Eigen::Index> decoder_hidden{64, 128};
  Eigen::Index batch_size = 128;
  long steps = 3000;
  double lambda1 = 10.0;
  double lambda2 = 1000.0;
  double lambda3 = 20.0;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  BandwidthPolicy bandwidth;
  Regularizer regularizer = Regularizer::kDisentangle;

  void validate() const {
    if (d_z < 1) throw ConfigError("d_z must be >= 1");
    if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) throw ConfigError("lambda weights must be >= 0");
    if (!std::isfinite(lambda1) || !std::isfinite(lambda2) || !std::isfinite(lambda3)) {
      throw ConfigError("lambda weights must be finite");
    }
    if (batch_size < 4) throw ConfigError("batch_size must be >= 4");
    if (steps < 0) throw ConfigError("steps must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (regularizer == Regularizer::kDisentangle && (lambda2 > 0.0 || lambda3 > 0.0) && d_z < 2) {
      throw ConfigError("d_z must be >= 2 when the disentanglement terms are active");
    }
    if (regularizer == Regularizer::kAllAxes && lambda3 != 0.0) {
      throw ConfigError("all-axes regularizer has no dependent axis; lambda3 must be 0");
    }
    for (Eigen::Index h : encoder_hidden) {
      if (h <= 0) throw ConfigError("encoder hidden sizes must be positive");
    }
    for (Eigen::Index h : decoder_hidden) {
      if (h <= 0) throw ConfigError("decoder hidden sizes must be positive");
    }
    if (bandwidth.kind == BandwidthPolicy::Kind::kFrozen &&
        (!(bandwidth.latent_sigma2 > 0.0) || !(bandwidth.side_sigma2 > 0.0))) {
      throw ConfigError("frozen bandwidths must be > 0");
    }
  }
};

struct LambdaPreset {
  double lambda1;
  double lambda2;
  double lambda3;
};

// "lidc" and "k562" are the published weights for the convolutional models;
// "synthetic" is tuned for the MLP on the blob dataset.
inline std::optional<LambdaPreset> find_preset(const std::string& name) {
  if (name == "lidc") return LambdaPreset{1.0, 0.002, 0.05};
  if (name == "k562") return LambdaPreset{10.0, 0.2, 0.01};
  if (name == "synthetic") return LambdaPreset{10.0, 1000.0, 20.0};
  return std::nullopt;
}

inline TrainingConfig preset_config(const std::string& name) {
  const auto p = find_preset(name);
  if (!p) throw ConfigError("unknown preset '" + name + "'");
  TrainingConfig c;
  c.preset = name;
  c.lambda1 = p->lambda1;
  c.lambda2 = p->lambda2;
  c.lambda3 = p->lambda3;
  return c;
}

struct LossBreakdown {
  double recon = 0.0;
  double mmd = 0.0;
  double hsic_ind = 0.0;
  double hsic_dep = 0.0;
  double total = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;

  static double compose(double recon, double mmd, double hsic_ind, double hsic_dep, double l1, double l2, double l3) {
    return recon + l1 * mmd + l2 * hsic_ind - l3 * hsic_dep;
  }
  double recomposed() const { return compose(recon, mmd, hsic_ind, hsic_dep, lambda1, lambda2, lambda3); }
};

// Latent batch with Z_dep = column 0 and Z_ind = columns 1..d_z-1.
struct LatentPartition {
  Matrix z;

  Matrix dep() const { return z.col(0); }
  Matrix ind() const {
    if (z.cols() < 2) throw PreconditionError("latent code has no independent axes (d_z = 1)");
    return z.rightCols(z.cols() - 1);
  }
};

struct WaeModel {
  MlpParams encoder;
  MlpParams decoder;
};

// i.i.d. standard normal, filled row by row.
inline Matrix prior_sample(Eigen::Index n, Eigen::Index d_z, Rng& rng) {
  if (n < 1 || d_z < 1) throw PreconditionError("prior_sample needs n >= 1 and d_z >= 1");
  Matrix out(n, d_z);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d_z; ++j) out(i, j) = rng.normal();
  }
  return out;
}

inline LatentPartition encode(const MlpParams& encoder, const Matrix& x) { return {mlp_apply(encoder, x)}; }
inline Matrix decode(const MlpParams& decoder, const Matrix& z) { return mlp_apply(decoder, z); }

// Encoder d_x -> hidden -> d_z (leaky-ReLU, identity last); decoder mirrors it
// with a sigmoid output.
inline WaeModel init_model(const TrainingConfig& config, Eigen::Index d_x, Rng& rng) {
  std::vector<Eigen::Index> enc_dims{d_x};
  enc_dims.insert(enc_dims.end(), config.encoder_hidden.begin(), config.encoder_hidden.end());
  enc_dims.push_back(config.d_z);
  std::vector<Activation> enc_act(enc_dims.size() - 1, Activation::kLeakyRelu);
  enc_act.back() = Activation::kIdentity;

  std::vector<Eigen::Index> dec_dims{config.d_z};
  dec_dims.insert(dec_dims.end(), config.decoder_hidden.begin(), config.decoder_hidden.end());
  dec_dims.push_back(d_x);
  std::vector<Activation> dec_act(dec_dims.size() - 1, Activation::kLeakyRelu);
  dec_act.back() = Activation::kSigmoid;

  WaeModel m;
  m.encoder = init_params(enc_dims, enc_act, rng);
  m.decoder = init_params(dec_dims, dec_act, rng);
  return m;
}

// The composed loss as a reusable graph for a fixed batch size.
class LossGraph {
 public:
  // Tags attached to the kernel nodes so tests can confirm which kernel feeds which term.
  static constexpr const char* kMmdKernelTag = "kernel/mmd/imq";
  static constexpr const char* kHsicIndKernelTag = "kernel/hsic_ind/rbf";
  static constexpr const char* kHsicDepKernelTag = "kernel/hsic_dep/rbf";
  static constexpr const char* kSideKernelTag = "kernel/side/rbf";

  LossGraph(const TrainingConfig& config, const MlpParams& encoder_shape, const MlpParams& decoder_shape,
            Eigen::Index batch)
      : config_(config), batch_(batch) {
    config.validate();
    if (batch < 2) throw PreconditionError("loss needs a batch of at least 2 samples");
    if (encoder_shape.out_dim() != config.d_z || decoder_shape.in_dim() != config.d_z) {
      throw ShapeError("encoder/decoder latent width does not match d_z=" + std::to_string(config.d_z));
    }
    if (decoder_shape.out_dim() != encoder_shape.in_dim()) {
      throw ShapeError("decoder output width does not match encoder input width");
    }
    build(encoder_shape, decoder_shape);
  }

  Eigen::Index batch() const { return batch_; }
  const ad::Graph& graph() const { return graph_; }
  const TrainingConfig& config() const { return config_; }

  LossBreakdown evaluate(const WaeModel& model, const Matrix& x, const Matrix& s, const Matrix& prior) {
    if (x.rows() != s.rows()) {
      throw ShapeError("data batch has " + std::to_string(x.rows()) + " rows but side info has " +
                       std::to_string(s.rows()));
    }
    std::vector<ad::Feed> feeds{{x_, std::cref(x)}, {s_, std::cref(s)}, {prior_, std::cref(prior)}};
    enc_feeds_.append(model.encoder, enc_, feeds);
    dec_feeds_.append(model.decoder, dec_, feeds);
    graph_.forward(feeds, total_);

    LossBreakdown lb;
    lb.recon = graph_.value(recon_)(0, 0);
    lb.mmd = graph_.value(mmd_)(0, 0);
    lb.hsic_ind = hsic_ind_ ? graph_.value(*hsic_ind_)(0, 0) : 0.0;
    lb.hsic_dep = hsic_dep_ ? graph_.value(*hsic_dep_)(0, 0) : 0.0;
    lb.lambda1 = config_.lambda1;
    lb.lambda2 = config_.lambda2;
    lb.lambda3 = config_.lambda3;
    lb.total = lb.recomposed();
    return lb;
  }

  // Gradients of the total w.r.t. encoder and decoder; call after evaluate.
  WaeModel gradients(const WaeModel& model) {
    const ad::Gradients g = graph_.backward(total_);
    return {collect_grads(model.encoder, enc_, g), collect_grads(model.decoder, dec_, g)};
  }

  double total_value() const { return graph_.value(total_)(0, 0); }

 private:
  ad::NodeId imq(ad::NodeId a, ad::NodeId b) {
    ad::NodeId k = graph_.rsqrt(graph_.shift(graph_.pairwise_sq_dist(a, b), 1.0));
    graph_.set_tag(k, kMmdKernelTag);
    return k;
  }

  ad::NodeId rbf_gram(ad::NodeId block, double frozen_sigma2, const char* tag) {
    ad::NodeId d2 = graph_.pairwise_sq_dist(block, block);
    ad::NodeId sigma2 = config_.bandwidth.kind == BandwidthPolicy::Kind::kPerBatchMedian
                            ? graph_.median_bandwidth(d2)
                            : graph_.constant(Matrix::Constant(1, 1, frozen_sigma2), "frozen_sigma2");
    // exp(d2 * (1 / (-2 sigma^2)))
    ad::NodeId k = graph_.exp(graph_.mul_scalar(d2, graph_.reciprocal(graph_.scale(sigma2, -2.0))));
    graph_.set_tag(k, tag);
    return k;
  }

  // (1/n^2) tr(K H L H), with K H and L H formed by row centering.
  ad::NodeId hsic(ad::NodeId k, ad::NodeId lh) {
    const double n = static_cast<double>(batch_);
    return graph_.scale(graph_.trace_matmul(graph_.center_rows(k), lh), 1.0 / (n * n));
  }

  void build(const MlpParams& enc_shape, const MlpParams& dec_shape) {
    const Eigen::Index n = batch_;
    const Eigen::Index d_x = enc_shape.in_dim();
    const Eigen::Index d_z = config_.d_z;
    x_ = graph_.placeholder("x", n, d_x);
    s_ = graph_.placeholder("s", n, 1);
    prior_ = graph_.placeholder("prior", n, d_z);
    enc_ = add_mlp(graph_, enc_shape, x_, "encoder");
    dec_ = add_mlp(graph_, dec_shape, enc_.output, "decoder");
    const ad::NodeId z = enc_.output;

    ad::NodeId diff = graph_.sub(x_, dec_.output);
    recon_ = graph_.scale(graph_.sum(graph_.mul(diff, diff)), 1.0 / static_cast<double>(n));
    graph_.set_tag(recon_, "term/recon");

    const double nn = static_cast<double>(n);
    ad::NodeId kzz = imq(z, z);
    ad::NodeId kpp = imq(prior_, prior_);
    ad::NodeId kzp = imq(z, prior_);
    ad::NodeId within_z = graph_.scale(graph_.sub(graph_.sum(kzz), graph_.trace(kzz)), 1.0 / (nn * (nn - 1.0)));
    ad::NodeId within_p = graph_.scale(graph_.sub(graph_.sum(kpp), graph_.trace(kpp)), 1.0 / (nn * (nn - 1.0)));
    ad::NodeId cross = graph_.scale(graph_.sum(kzp), 2.0 / (nn * nn));
    mmd_ = graph_.sub(graph_.add(within_z, within_p), cross);
    graph_.set_tag(mmd_, "term/mmd");

    ad::NodeId l = graph_.center_rows(rbf_gram(s_, config_.bandwidth.side_sigma2, kSideKernelTag));

    ad::NodeId total = graph_.add(recon_, graph_.scale(mmd_, config_.lambda1));
    if (config_.regularizer == Regularizer::kAllAxes) {
      hsic_ind_ = hsic(rbf_gram(z, config_.bandwidth.latent_sigma2, kHsicIndKernelTag), l);
      graph_.set_tag(*hsic_ind_, "term/hsic_ind");
      total = graph_.add(total, graph_.scale(*hsic_ind_, config_.lambda2));
    } else {
      if (d_z >= 2) {
        ad::NodeId z_ind = graph_.cols_slice(z, 1, d_z - 1);
        hsic_ind_ = hsic(rbf_gram(z_ind, config_.bandwidth.latent_sigma2, kHsicIndKernelTag), l);
        graph_.set_tag(*hsic_ind_, "term/hsic_ind");
        total = graph_.add(total, graph_.scale(*hsic_ind_, config_.lambda2));
      }
      ad::NodeId z_dep = graph_.cols_slice(z, 0, 1);
      hsic_dep_ = hsic(rbf_gram(z_dep, config_.bandwidth.latent_sigma2, kHsicDepKernelTag), l);
      graph_.set_tag(*hsic_dep_, "term/hsic_dep");
      total = graph_.sub(total, graph_.scale(*hsic_dep_, config_.lambda3));
    }
    total_ = total;
    graph_.set_tag(total_, "term/total");
  }

  TrainingConfig config_;
  Eigen::Index batch_;
  ad::Graph graph_;
  ad::NodeId x_, s_, prior_, recon_, mmd_, total_;
  std::optional<ad::NodeId> hsic_ind_, hsic_dep_;
  MlpNodes enc_, dec_;
  MlpFeeds enc_feeds_, dec_feeds_;
};

// One evaluation of the loss on (x, s) with a fresh prior sample drawn from rng.
inline LossBreakdown compute_loss(const WaeModel& model, const Matrix& x, const Matrix& s,
                                  const TrainingConfig& config, Rng& rng) {
  if (x.rows() != s.rows()) {
    throw ShapeError("compute_loss: " + std::to_string(x.rows()) + " data rows vs " + std::to_string(s.rows()) +
                     " side-info rows");
  }
  if (x.rows() < 2) throw PreconditionError("compute_loss needs a batch of at least 2");
  if (s.cols() != 1) throw ShapeError("side information must be a single column");
  LossGraph loss(config, model.encoder, model.decoder, x.rows());
  return loss.evaluate(model, x, s, prior_sample(x.rows(), config.d_z, rng));
}

struct TrainResult {
  WaeModel model;
  std::vector<LossBreakdown> trace;
};

// Independent streams derived from the run seed.
struct TrainStreams {
  Rng init;
  Rng batches;
  Rng prior;

  explicit TrainStreams(std::uint64_t seed)
      : init(splitmix64(seed ^ 0x1111)), batches(splitmix64(seed ^ 0x2222)), prior(splitmix64(seed ^ 0x3333)) {}
};

using StepCallback = std::function<void(long step, const LossBreakdown&)>;

// Trains from a seeded initialization. Each epoch reshuffles the rows and
// walks them in batch-size chunks; a trailing partial chunk is skipped.
inline TrainResult train(const TrainingConfig& config, const Matrix& data, const Matrix& side,
                         const StepCallback& on_step = {}) {
  config.validate();
  if (data.rows() != side.rows()) {
    throw ShapeError("train: " + std::to_string(data.rows()) + " data rows vs " + std::to_string(side.rows()) +
                     " side-info rows");
  }
  if (side.cols() != 1) throw ShapeError("side information must be a single column");
  if (data.rows() < config.batch_size) {
    throw PreconditionError("dataset has " + std::to_string(data.rows()) + " rows, fewer than batch size " +
                            std::to_string(config.batch_size));
  }
  TrainStreams streams(config.seed);
  TrainResult result;
  result.model = init_model(config, data.cols(), streams.init);
  if (config.steps == 0) return result;

  AdamConfig adam;
  adam.alpha = config.learning_rate;
  AdamState enc_state = AdamState::zeros_like(result.model.encoder, adam);
  AdamState dec_state = AdamState::zeros_like(result.model.decoder, adam);
  LossGraph loss(config, result.model.encoder, result.model.decoder, config.batch_size);

  const Eigen::Index n = config.batch_size;
  std::vector<Eigen::Index> order;
  std::size_t cursor = 0;
  Matrix xb(n, data.cols());
  Matrix sb(n, 1);
  result.trace.reserve(static_cast<std::size_t>(config.steps));
  for (long step = 0; step < config.steps; ++step) {
    if (order.empty() || cursor + static_cast<std::size_t>(n) > order.size()) {
      order = streams.batches.permutation(data.rows());
      cursor = 0;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index row = order[cursor + static_cast<std::size_t>(i)];
      xb.row(i) = data.row(row);
      sb(i, 0) = side(row, 0);
    }
    cursor += static_cast<std::size_t>(n);
    const Matrix prior = prior_sample(n, config.d_z, streams.prior);

    LossBreakdown lb;
    WaeModel grads;
    try {
      lb = loss.evaluate(result.model, xb, sb, prior);
      if (!std::isfinite(lb.total)) throw NumericError("non-finite loss");
      grads = loss.gradients(result.model);
    } catch (const NumericError& e) {
      throw NumericError("training aborted at step " + std::to_string(step) + ": " + e.what(), step);
    }
    adam_step(result.model.encoder, grads.encoder, enc_state);
    adam_step(result.model.decoder, grads.decoder, dec_state);
    result.trace.push_back(lb);
    if (on_step) on_step(step, lb);
  }
  return result;
}

}  // namespace hsicwae
