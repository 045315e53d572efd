#pragma once

#include "hsicwae/autodiff.hpp"
#include "hsicwae/common.hpp"

#include <string>
#include <vector>

namespace hsicwae {

enum class Activation { kIdentity, kLeakyRelu, kSigmoid };

inline constexpr double kLeakySlope = 0.2;

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kLeakyRelu: return "leaky_relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "identity";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "leaky_relu") return Activation::kLeakyRelu;
  if (s == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + s + "'");
}

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::kIdentity;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

struct MlpParams {
  std::vector<Layer> layers;

  Eigen::Index in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  Eigen::Index out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

  void validate() const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const Layer& l = layers[i];
      if (l.bias.size() != l.out_dim()) {
        throw ShapeError("layer " + std::to_string(i) + ": bias size " + std::to_string(l.bias.size()) +
                         " != output dim " + std::to_string(l.out_dim()));
      }
      if (i > 0 && layers[i - 1].out_dim() != l.in_dim()) {
        throw ShapeError("layer " + std::to_string(i) + ": input dim " + std::to_string(l.in_dim()) +
                         " does not chain with previous output " + std::to_string(layers[i - 1].out_dim()));
      }
      if (!l.weight.allFinite() || !l.bias.allFinite()) {
        throw NumericError("layer " + std::to_string(i) + " has non-finite parameters");
      }
    }
  }

  friend bool operator==(const MlpParams& a, const MlpParams& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      const Layer& x = a.layers[i];
      const Layer& y = b.layers[i];
      if (x.activation != y.activation || x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols() ||
          x.weight != y.weight || x.bias != y.bias) {
        return false;
      }
    }
    return true;
  }
};

// Glorot-uniform weights, zero biases. layer_dims = {in, h1, ..., out};
// one activation per layer.
inline MlpParams init_params(const std::vector<Eigen::Index>& layer_dims, const std::vector<Activation>& activations,
                             Rng& rng) {
  if (layer_dims.size() < 2) throw PreconditionError("init_params needs at least two layer dimensions");
  if (activations.size() != layer_dims.size() - 1) {
    throw PreconditionError("init_params needs one activation per layer");
  }
  for (Eigen::Index d : layer_dims) {
    if (d <= 0) throw PreconditionError("init_params: non-positive layer dimension " + std::to_string(d));
  }
  MlpParams p;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    const Eigen::Index fan_in = layer_dims[i];
    const Eigen::Index fan_out = layer_dims[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer l;
    l.weight.resize(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) l.weight(r, c) = rng.uniform(-limit, limit);
    }
    l.bias = Vector::Zero(fan_out);
    l.activation = activations[i];
    p.layers.push_back(std::move(l));
  }
  return p;
}

inline Matrix apply_activation(Activation a, Matrix x) {
  switch (a) {
    case Activation::kIdentity: return x;
    case Activation::kLeakyRelu: return x.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
    case Activation::kSigmoid:
      return x.unaryExpr([](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
  }
  return x;
}

// Eager evaluation (no graph), for inference.
inline Matrix mlp_apply(const MlpParams& params, const Matrix& x) {
  if (params.layers.empty()) throw PreconditionError("mlp_apply on an empty network");
  if (x.cols() != params.in_dim()) {
    throw ShapeError("mlp_apply: input has " + std::to_string(x.cols()) + " columns, network expects " +
                     std::to_string(params.in_dim()));
  }
  Matrix h = x;
  for (const Layer& l : params.layers) {
    Matrix pre = h * l.weight.transpose();
    pre.rowwise() += l.bias.transpose();
    h = apply_activation(l.activation, std::move(pre));
  }
  return h;
}

// Placeholders for one network inside a graph.
struct MlpNodes {
  std::vector<ad::NodeId> weights;
  std::vector<ad::NodeId> biases;  // 1 x out rows
  ad::NodeId output;
};

inline MlpNodes add_mlp(ad::Graph& g, const MlpParams& shape, ad::NodeId input, const std::string& prefix,
                        bool trainable = true) {
  if (shape.layers.empty()) throw PreconditionError("add_mlp on an empty network");
  if (g.cols(input) != shape.in_dim()) {
    throw ShapeError(prefix + ": input has " + std::to_string(g.cols(input)) + " columns, network expects " +
                     std::to_string(shape.in_dim()));
  }
  MlpNodes nodes;
  ad::NodeId h = input;
  for (std::size_t i = 0; i < shape.layers.size(); ++i) {
    const Layer& l = shape.layers[i];
    const std::string base = prefix + "." + std::to_string(i);
    ad::NodeId w = g.placeholder(base + ".weight", l.out_dim(), l.in_dim(), trainable);
    ad::NodeId b = g.placeholder(base + ".bias", 1, l.out_dim(), trainable);
    h = g.add_row(g.matmul(h, g.transpose(w)), b);
    switch (l.activation) {
      case Activation::kIdentity: break;
      case Activation::kLeakyRelu: h = g.leaky_relu(h, kLeakySlope); break;
      case Activation::kSigmoid: h = g.sigmoid(h); break;
    }
    nodes.weights.push_back(w);
    nodes.biases.push_back(b);
  }
  nodes.output = h;
  return nodes;
}

// Feed storage for an MlpNodes binding; biases are fed as 1 x out rows.
struct MlpFeeds {
  std::vector<Matrix> bias_rows;

  void append(const MlpParams& params, const MlpNodes& nodes, std::vector<ad::Feed>& feeds) {
    bias_rows.clear();
    bias_rows.reserve(params.layers.size());
    for (const Layer& l : params.layers) bias_rows.push_back(l.bias.transpose());
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
      feeds.push_back({nodes.weights[i], std::cref(params.layers[i].weight)});
      feeds.push_back({nodes.biases[i], std::cref(bias_rows[i])});
    }
  }
};

// Gradients with the same layout as the parameters.
inline MlpParams collect_grads(const MlpParams& params, const MlpNodes& nodes, const ad::Gradients& g) {
  MlpParams out = params;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    out.layers[i].weight = g[nodes.weights[i]];
    out.layers[i].bias = g[nodes.biases[i]].row(0).transpose();
  }
  return out;
}

}  // namespace hsicwae
