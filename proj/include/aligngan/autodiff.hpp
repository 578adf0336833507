#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aligngan/tensor.hpp"

namespace aligngan {

enum class OpKind {
  leaf,
  constant,
  matmul,
  conv2d,
  transposed_conv2d,
  add,
  sub,
  mul,
  concat,
  slice,
  reshape,
  leaky_relu,
  tanh,
  sigmoid,
  log,
  square,
  mean,
  sum,
  scale,
  clamp_min,
  channel_bias,
  batch_norm,
  custom,
};

const char* op_name(OpKind kind);

using NodeId = std::size_t;
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  NodeId id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Accumulates the contribution of one node into its inputs' gradients.
/// `in_grads[i]` is null when input i does not need a gradient.
using BackwardFn =
    std::function<void(const Graph& graph, NodeId self, const Tensor& out_grad,
                       std::span<Tensor* const> in_grads)>;

/// Append-only tape. Node k only ever references inputs with id < k, so
/// insertion order is a topological order and the graph is acyclic.
/// One graph belongs to one computation (e.g. one half of a training step);
/// it is not safe to share across threads.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Differentiable input (a parameter or anything we want d loss / d x for).
  Var leaf(Tensor value, std::string name = {});
  /// Input that never receives a gradient.
  Var constant(Tensor value);
  /// Low-level insertion used by every op.
  Var record(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  std::span<const NodeId> inputs(NodeId id) const { return nodes_.at(id).inputs; }
  const std::string& name(NodeId id) const { return nodes_.at(id).name; }
  const BackwardFn& backward_fn(NodeId id) const { return nodes_.at(id).backward; }

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    Tensor value;
    BackwardFn backward;
    bool requires_grad = false;
    std::string name;
  };
  std::vector<Node> nodes_;
};

/// Gradients of a scalar loss with respect to the leaves it depends on.
class Gradients {
 public:
  bool has(Var v) const { return v.id < grads_.size() && grads_[v.id].has_value(); }
  /// Throws if `v` received no gradient.
  const Tensor& at(Var v) const;
  /// Gradient of `v`, or zeros shaped like it when the loss does not depend on it.
  Tensor get_or_zero(Var v) const;
  std::size_t count() const;

 private:
  friend Gradients backward(const Graph&, Var, const std::function<void(NodeId)>&);
  std::vector<std::optional<Tensor>> grads_;
};

/// Reverse sweep from a scalar (single-element) loss. `visit`, when set, is
/// called with every node whose backward rule runs, in the order it runs.
Gradients backward(const Graph& graph, Var loss, const std::function<void(NodeId)>& visit = {});

}  // namespace aligngan
