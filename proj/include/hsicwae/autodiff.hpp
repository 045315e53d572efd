#pragma once

// Define-then-run reverse-mode automatic differentiation over dense
// double-precision matrices. Nodes are appended in topological order; a
// graph is built once, then evaluated repeatedly with fresh placeholder feeds.

#include "hsicwae/bandwidth.hpp"
#include "hsicwae/common.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hsicwae::ad {

struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

enum class Op {
  kPlaceholder,
  kConstant,
  kMatMul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kScale,
  kShift,
  kAddRow,
  kMulScalar,
  kExp,
  kRsqrt,
  kReciprocal,
  kSum,
  kMean,
  kPairwiseSqDist,
  kSlice,
  kLeakyRelu,
  kSigmoid,
  kTrace,
  kMedianBandwidth,
  kCenterRows,
  kTraceMatMul,
};

inline std::string_view op_name(Op op) {
  switch (op) {
    case Op::kPlaceholder: return "placeholder";
    case Op::kConstant: return "constant";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kShift: return "shift";
    case Op::kAddRow: return "add_row";
    case Op::kMulScalar: return "mul_scalar";
    case Op::kExp: return "exp";
    case Op::kRsqrt: return "rsqrt";
    case Op::kReciprocal: return "reciprocal";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kPairwiseSqDist: return "pairwise_sq_dist";
    case Op::kSlice: return "slice";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTrace: return "trace";
    case Op::kMedianBandwidth: return "median_bandwidth";
    case Op::kCenterRows: return "center_rows";
    case Op::kTraceMatMul: return "trace_matmul";
  }
  return "unknown";
}

struct Feed {
  NodeId node;
  std::reference_wrapper<const Matrix> value;
};

// Adjoints of the trainable placeholders after a backward pass.
class Gradients {
 public:
  const Matrix& operator[](NodeId id) const {
    if (id.index >= grads_.size() || !grads_[id.index]) {
      throw PreconditionError("no gradient recorded for node #" + std::to_string(id.index));
    }
    return *grads_[id.index];
  }
  bool contains(NodeId id) const { return id.index < grads_.size() && grads_[id.index].has_value(); }

 private:
  friend class Graph;
  std::vector<std::optional<Matrix>> grads_;
};

class Graph {
 public:
  // ---- construction -------------------------------------------------------

  NodeId placeholder(std::string name, Eigen::Index rows, Eigen::Index cols, bool trainable = false) {
    if (rows <= 0 || cols <= 0) throw ShapeError("placeholder '" + name + "' needs positive shape");
    Node n = make(Op::kPlaceholder, {}, rows, cols);
    n.name = std::move(name);
    n.trainable = trainable;
    n.requires_grad = trainable;
    return push(std::move(n));
  }

  NodeId constant(Matrix value, std::string name = {}) {
    if (!value.allFinite()) throw NumericError("constant '" + name + "' has non-finite entries");
    Node n = make(Op::kConstant, {}, value.rows(), value.cols());
    n.name = std::move(name);
    n.value = std::move(value);
    return push(std::move(n));
  }

  NodeId matmul(NodeId a, NodeId b) {
    if (cols(a) != rows(b)) shape_fail(Op::kMatMul, a, b);
    return push(make(Op::kMatMul, {a, b}, rows(a), cols(b)));
  }
  NodeId transpose(NodeId a) { return push(make(Op::kTranspose, {a}, cols(a), rows(a))); }
  NodeId add(NodeId a, NodeId b) { return binary_same(Op::kAdd, a, b); }
  NodeId sub(NodeId a, NodeId b) { return binary_same(Op::kSub, a, b); }
  NodeId mul(NodeId a, NodeId b) { return binary_same(Op::kMul, a, b); }

  NodeId scale(NodeId a, double c) {
    Node n = make(Op::kScale, {a}, rows(a), cols(a));
    n.scalar = c;
    return push(std::move(n));
  }
  NodeId shift(NodeId a, double c) {
    Node n = make(Op::kShift, {a}, rows(a), cols(a));
    n.scalar = c;
    return push(std::move(n));
  }
  // a (n x m) + row (1 x m) broadcast over rows.
  NodeId add_row(NodeId a, NodeId row) {
    if (rows(row) != 1 || cols(row) != cols(a)) shape_fail(Op::kAddRow, a, row);
    return push(make(Op::kAddRow, {a, row}, rows(a), cols(a)));
  }
  // a * s where s is a 1 x 1 node.
  NodeId mul_scalar(NodeId a, NodeId s) {
    if (rows(s) != 1 || cols(s) != 1) shape_fail(Op::kMulScalar, a, s);
    return push(make(Op::kMulScalar, {a, s}, rows(a), cols(a)));
  }

  NodeId exp(NodeId a) { return unary(Op::kExp, a); }
  NodeId rsqrt(NodeId a) { return unary(Op::kRsqrt, a); }
  NodeId reciprocal(NodeId a) { return unary(Op::kReciprocal, a); }
  NodeId sigmoid(NodeId a) { return unary(Op::kSigmoid, a); }
  NodeId leaky_relu(NodeId a, double slope) {
    Node n = make(Op::kLeakyRelu, {a}, rows(a), cols(a));
    n.scalar = slope;
    return push(std::move(n));
  }

  NodeId sum(NodeId a) { return push(make(Op::kSum, {a}, 1, 1)); }
  NodeId mean(NodeId a) { return push(make(Op::kMean, {a}, 1, 1)); }
  NodeId trace(NodeId a) {
    if (rows(a) != cols(a)) shape_fail(Op::kTrace, a, a);
    return push(make(Op::kTrace, {a}, 1, 1));
  }

  // a H with H = I - (1/n) 1 1^T: subtracts each row's mean.
  NodeId center_rows(NodeId a) { return unary(Op::kCenterRows, a); }

  // tr(a b) without forming the product.
  NodeId trace_matmul(NodeId a, NodeId b) {
    if (cols(a) != rows(b) || rows(a) != cols(b)) shape_fail(Op::kTraceMatMul, a, b);
    return push(make(Op::kTraceMatMul, {a, b}, 1, 1));
  }

  // (i, j) -> ||a_i - b_j||^2 for the rows of a and b.
  NodeId pairwise_sq_dist(NodeId a, NodeId b) {
    if (cols(a) != cols(b)) shape_fail(Op::kPairwiseSqDist, a, b);
    return push(make(Op::kPairwiseSqDist, {a, b}, rows(a), rows(b)));
  }

  NodeId slice(NodeId a, Eigen::Index row0, Eigen::Index nrows, Eigen::Index col0, Eigen::Index ncols) {
    if (row0 < 0 || col0 < 0 || nrows <= 0 || ncols <= 0 || row0 + nrows > rows(a) || col0 + ncols > cols(a)) {
      throw ShapeError("slice node #" + std::to_string(nodes_.size()) + ": block " + shape_str(row0, col0) +
                       "+" + shape_str(nrows, ncols) + " outside " + shape_str(rows(a), cols(a)));
    }
    Node n = make(Op::kSlice, {a}, nrows, ncols);
    n.row0 = row0;
    n.col0 = col0;
    return push(std::move(n));
  }
  NodeId cols_slice(NodeId a, Eigen::Index col0, Eigen::Index ncols) { return slice(a, 0, rows(a), col0, ncols); }

  // Median-trick sigma^2 (1 x 1) from a square squared-distance matrix;
  // differentiable through the entries that determine the median.
  NodeId median_bandwidth(NodeId sq_dists) {
    if (rows(sq_dists) != cols(sq_dists) || rows(sq_dists) < 2) shape_fail(Op::kMedianBandwidth, sq_dists, sq_dists);
    return push(make(Op::kMedianBandwidth, {sq_dists}, 1, 1));
  }

  // ---- inspection ---------------------------------------------------------

  void set_tag(NodeId id, std::string tag) { at(id).tag = std::move(tag); }
  const std::string& tag(NodeId id) const { return at(id).tag; }
  Op op(NodeId id) const { return at(id).op; }
  Eigen::Index rows(NodeId id) const { return at(id).rows; }
  Eigen::Index cols(NodeId id) const { return at(id).cols; }
  std::size_t size() const { return nodes_.size(); }
  bool evaluated() const { return evaluated_upto_.has_value(); }

  std::vector<NodeId> find_tagged(std::string_view prefix) const {
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].tag.starts_with(prefix)) out.push_back(NodeId{i});
    }
    return out;
  }

  const Matrix& value(NodeId id) const {
    const Node& n = at(id);
    if (n.op != Op::kConstant && (!evaluated_upto_ || id.index > *evaluated_upto_)) {
      throw PreconditionError("node #" + std::to_string(id.index) + " has not been evaluated");
    }
    return n.value;
  }

  // ---- execution ----------------------------------------------------------

  // Evaluates every node up to `output`. Each placeholder on the way must be fed.
  const Matrix& forward(std::span<const Feed> feeds, NodeId output) {
    at(output);
    evaluated_upto_.reset();
    for (const Feed& f : feeds) {
      Node& n = at(f.node);
      const Matrix& v = f.value.get();
      if (n.op != Op::kPlaceholder) throw PreconditionError("feed targets non-placeholder " + label(f.node));
      if (v.rows() != n.rows || v.cols() != n.cols) {
        throw ShapeError("feed for " + label(f.node) + " has shape " + shape_str(v.rows(), v.cols()) +
                         ", declared " + shape_str(n.rows, n.cols));
      }
      if (!v.allFinite()) throw NumericError("feed for " + label(f.node) + " has non-finite entries");
      n.value = v;
      n.fed = true;
    }
    for (std::size_t i = 0; i <= output.index; ++i) {
      Node& n = nodes_[i];
      if (n.op == Op::kPlaceholder) {
        if (!n.fed) throw PreconditionError("placeholder " + label(NodeId{i}) + " was not fed");
        continue;
      }
      if (n.op == Op::kConstant) continue;
      evaluate(n);
      if (!n.value.allFinite()) throw NumericError("non-finite value produced at " + label(NodeId{i}));
    }
    for (Node& n : nodes_) n.fed = false;
    evaluated_upto_ = output.index;
    return nodes_[output.index].value;
  }

  Gradients backward(NodeId output) {
    const Node& out = at(output);
    if (!evaluated_upto_ || output.index > *evaluated_upto_) {
      throw PreconditionError("backward called before forward for " + label(output));
    }
    if (out.rows != 1 || out.cols != 1) {
      throw ShapeError("backward needs a scalar output, " + label(output) + " is " + shape_str(out.rows, out.cols));
    }
    std::vector<std::optional<Matrix>> adj(output.index + 1);
    adj[output.index] = Matrix::Ones(1, 1);
    for (std::size_t i = output.index + 1; i-- > 0;) {
      if (!adj[i] || !nodes_[i].requires_grad) continue;
      propagate(nodes_[i], *adj[i], adj);
    }
    Gradients g;
    g.grads_.resize(nodes_.size());
    for (std::size_t i = 0; i <= output.index; ++i) {
      if (nodes_[i].trainable) {
        g.grads_[i] = adj[i] ? std::move(*adj[i]) : Matrix::Zero(nodes_[i].rows, nodes_[i].cols);
      }
    }
    for (std::size_t i = output.index + 1; i < nodes_.size(); ++i) {
      if (nodes_[i].trainable) g.grads_[i] = Matrix::Zero(nodes_[i].rows, nodes_[i].cols);
    }
    return g;
  }

  std::string label(NodeId id) const {
    const Node& n = at(id);
    std::string s = std::string(op_name(n.op)) + "#" + std::to_string(id.index);
    if (!n.name.empty()) s += " '" + n.name + "'";
    if (!n.tag.empty()) s += " [" + n.tag + "]";
    return s;
  }

 private:
  struct Node {
    Op op = Op::kConstant;
    std::vector<NodeId> parents;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Matrix value;
    std::string name;
    std::string tag;
    double scalar = 0.0;
    Eigen::Index row0 = 0;
    Eigen::Index col0 = 0;
    bool trainable = false;
    bool requires_grad = false;
    bool fed = false;
    std::vector<BandwidthPick::Entry> picks;
  };

  Node& at(NodeId id) {
    if (id.index >= nodes_.size()) throw PreconditionError("unknown node #" + std::to_string(id.index));
    return nodes_[id.index];
  }
  const Node& at(NodeId id) const {
    if (id.index >= nodes_.size()) throw PreconditionError("unknown node #" + std::to_string(id.index));
    return nodes_[id.index];
  }

  Node make(Op op, std::vector<NodeId> parents, Eigen::Index r, Eigen::Index c) {
    Node n;
    n.op = op;
    for (NodeId p : parents) n.requires_grad = n.requires_grad || at(p).requires_grad;
    n.parents = std::move(parents);
    n.rows = r;
    n.cols = c;
    return n;
  }

  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    evaluated_upto_.reset();
    return NodeId{nodes_.size() - 1};
  }

  NodeId unary(Op op, NodeId a) { return push(make(op, {a}, rows(a), cols(a))); }

  NodeId binary_same(Op op, NodeId a, NodeId b) {
    if (rows(a) != rows(b) || cols(a) != cols(b)) shape_fail(op, a, b);
    return push(make(op, {a, b}, rows(a), cols(a)));
  }

  [[noreturn]] void shape_fail(Op op, NodeId a, NodeId b) const {
    throw ShapeError(std::string(op_name(op)) + " node #" + std::to_string(nodes_.size()) + ": incompatible operands " +
                     label(a) + " " + shape_str(rows(a), cols(a)) + " and " + label(b) + " " +
                     shape_str(rows(b), cols(b)));
  }

  const Matrix& in(const Node& n, std::size_t k) const { return nodes_[n.parents[k].index].value; }

  void evaluate(Node& n) {
    switch (n.op) {
      case Op::kMatMul: n.value.noalias() = in(n, 0) * in(n, 1); break;
      case Op::kTranspose: n.value = in(n, 0).transpose(); break;
      case Op::kAdd: n.value = in(n, 0) + in(n, 1); break;
      case Op::kSub: n.value = in(n, 0) - in(n, 1); break;
      case Op::kMul: n.value = in(n, 0).cwiseProduct(in(n, 1)); break;
      case Op::kScale: n.value = in(n, 0) * n.scalar; break;
      case Op::kShift: n.value = in(n, 0).array() + n.scalar; break;
      case Op::kAddRow: n.value = in(n, 0).rowwise() + in(n, 1).row(0); break;
      case Op::kMulScalar: n.value = in(n, 0) * in(n, 1)(0, 0); break;
      case Op::kExp: n.value = in(n, 0).array().exp(); break;
      case Op::kRsqrt: n.value = in(n, 0).array().rsqrt(); break;
      case Op::kReciprocal: n.value = in(n, 0).array().inverse(); break;
      case Op::kSum: n.value = Matrix::Constant(1, 1, in(n, 0).sum()); break;
      case Op::kMean: n.value = Matrix::Constant(1, 1, in(n, 0).mean()); break;
      case Op::kTrace: n.value = Matrix::Constant(1, 1, in(n, 0).trace()); break;
      case Op::kPairwiseSqDist: n.value = hsicwae::pairwise_sq_dists(in(n, 0), in(n, 1)); break;
      case Op::kSlice: n.value = in(n, 0).block(n.row0, n.col0, n.rows, n.cols); break;
      case Op::kLeakyRelu: {
        const double slope = n.scalar;
        n.value = in(n, 0).unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
        break;
      }
      case Op::kSigmoid:
        n.value = in(n, 0).unaryExpr([](double x) {
          if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
          const double e = std::exp(x);
          return e / (1.0 + e);
        });
        break;
      case Op::kMedianBandwidth: {
        BandwidthPick pick = hsicwae::median_bandwidth(in(n, 0));
        n.value = Matrix::Constant(1, 1, pick.sigma2);
        n.picks = std::move(pick.picks);
        break;
      }
      case Op::kCenterRows: n.value = in(n, 0).colwise() - in(n, 0).rowwise().mean(); break;
      case Op::kTraceMatMul:
        n.value = Matrix::Constant(1, 1, in(n, 0).cwiseProduct(in(n, 1).transpose()).sum());
        break;
      case Op::kPlaceholder:
      case Op::kConstant: break;
    }
  }

  static void accumulate(std::vector<std::optional<Matrix>>& adj, NodeId id, const Matrix& g) {
    auto& slot = adj[id.index];
    if (slot) {
      *slot += g;
    } else {
      slot = g;
    }
  }

  void propagate(const Node& n, const Matrix& g, std::vector<std::optional<Matrix>>& adj) {
    const auto wants = [&](std::size_t k) { return nodes_[n.parents[k].index].requires_grad; };
    const auto send = [&](std::size_t k, const Matrix& grad) {
      if (wants(k)) accumulate(adj, n.parents[k], grad);
    };
    switch (n.op) {
      case Op::kMatMul:
        if (wants(0)) send(0, g * in(n, 1).transpose());
        if (wants(1)) send(1, in(n, 0).transpose() * g);
        break;
      case Op::kTranspose: send(0, g.transpose()); break;
      case Op::kAdd:
        send(0, g);
        send(1, g);
        break;
      case Op::kSub:
        send(0, g);
        if (wants(1)) send(1, -g);
        break;
      case Op::kMul:
        if (wants(0)) send(0, g.cwiseProduct(in(n, 1)));
        if (wants(1)) send(1, g.cwiseProduct(in(n, 0)));
        break;
      case Op::kScale: send(0, g * n.scalar); break;
      case Op::kShift: send(0, g); break;
      case Op::kAddRow:
        send(0, g);
        if (wants(1)) send(1, g.colwise().sum());
        break;
      case Op::kMulScalar:
        if (wants(0)) send(0, g * in(n, 1)(0, 0));
        if (wants(1)) send(1, Matrix::Constant(1, 1, g.cwiseProduct(in(n, 0)).sum()));
        break;
      case Op::kExp: send(0, g.cwiseProduct(n.value)); break;
      case Op::kRsqrt: send(0, (g.array() * n.value.array().cube() * -0.5).matrix()); break;
      case Op::kReciprocal: send(0, (-g.array() * n.value.array().square()).matrix()); break;
      case Op::kSum: send(0, Matrix::Constant(in(n, 0).rows(), in(n, 0).cols(), g(0, 0))); break;
      case Op::kMean: {
        const Matrix& x = in(n, 0);
        send(0, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / static_cast<double>(x.size())));
        break;
      }
      case Op::kTrace: {
        const Matrix& x = in(n, 0);
        send(0, Matrix::Identity(x.rows(), x.cols()) * g(0, 0));
        break;
      }
      case Op::kPairwiseSqDist: {
        const Matrix& a = in(n, 0);
        const Matrix& b = in(n, 1);
        if (wants(0)) {
          Matrix ga = 2.0 * (g.rowwise().sum().asDiagonal() * a - g * b);
          send(0, ga);
        }
        if (wants(1)) {
          Matrix gb = 2.0 * (g.colwise().sum().transpose().asDiagonal() * b - g.transpose() * a);
          send(1, gb);
        }
        break;
      }
      case Op::kSlice: {
        const Matrix& x = in(n, 0);
        Matrix full = Matrix::Zero(x.rows(), x.cols());
        full.block(n.row0, n.col0, n.rows, n.cols) = g;
        send(0, full);
        break;
      }
      case Op::kLeakyRelu: {
        const double slope = n.scalar;
        const Matrix& x = in(n, 0);
        send(0, g.binaryExpr(x, [slope](double gi, double xi) { return xi > 0.0 ? gi : slope * gi; }));
        break;
      }
      case Op::kSigmoid: send(0, (g.array() * n.value.array() * (1.0 - n.value.array())).matrix()); break;
      case Op::kMedianBandwidth: {
        const Matrix& d = in(n, 0);
        Matrix gd = Matrix::Zero(d.rows(), d.cols());
        for (const auto& p : n.picks) gd(p.row, p.col) += g(0, 0) * p.weight;
        send(0, gd);
        break;
      }
      case Op::kCenterRows: send(0, g.colwise() - g.rowwise().mean()); break;
      case Op::kTraceMatMul:
        if (wants(0)) send(0, in(n, 1).transpose() * g(0, 0));
        if (wants(1)) send(1, in(n, 0).transpose() * g(0, 0));
        break;
      case Op::kPlaceholder:
      case Op::kConstant: break;
    }
  }

  std::vector<Node> nodes_;
  std::optional<std::size_t> evaluated_upto_;
};

}  // namespace hsicwae::ad
