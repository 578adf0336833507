#include "aligngan/autodiff.hpp"

#include <algorithm>

#include "aligngan/error.hpp"

namespace aligngan {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::constant: return "constant";
    case OpKind::matmul: return "matmul";
    case OpKind::conv2d: return "conv2d";
    case OpKind::transposed_conv2d: return "transposed_conv2d";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::reshape: return "reshape";
    case OpKind::leaky_relu: return "leaky_relu";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::log: return "log";
    case OpKind::square: return "square";
    case OpKind::mean: return "mean";
    case OpKind::sum: return "sum";
    case OpKind::scale: return "scale";
    case OpKind::clamp_min: return "clamp_min";
    case OpKind::channel_bias: return "channel_bias";
    case OpKind::batch_norm: return "batch_norm";
    case OpKind::custom: return "custom";
  }
  return "?";
}

const Tensor& Var::value() const { return graph->value(id); }

Var Graph::leaf(Tensor value, std::string name) {
  nodes_.push_back({OpKind::leaf, {}, std::move(value), {}, true, std::move(name)});
  return {this, nodes_.size() - 1};
}

Var Graph::constant(Tensor value) {
  nodes_.push_back({OpKind::constant, {}, std::move(value), {}, false, {}});
  return {this, nodes_.size() - 1};
}

Var Graph::record(OpKind kind, std::vector<NodeId> inputs, Tensor value, BackwardFn backward) {
  const NodeId self = nodes_.size();
  bool needs = false;
  for (NodeId in : inputs) {
    if (in >= self) throw Error(std::string(op_name(kind)) + ": input node does not precede it");
    needs = needs || nodes_[in].requires_grad;
  }
  nodes_.push_back({kind, std::move(inputs), std::move(value), std::move(backward), needs, {}});
  return {this, self};
}

const Tensor& Gradients::at(Var v) const {
  if (!has(v)) throw Error("no gradient recorded for node " + std::to_string(v.id));
  return *grads_[v.id];
}

Tensor Gradients::get_or_zero(Var v) const {
  if (has(v)) return *grads_[v.id];
  return Tensor(v.shape(), 0.0);
}

std::size_t Gradients::count() const {
  return static_cast<std::size_t>(
      std::count_if(grads_.begin(), grads_.end(), [](const auto& g) { return g.has_value(); }));
}

Gradients backward(const Graph& graph, Var loss, const std::function<void(NodeId)>& visit) {
  if (loss.graph != &graph) throw Error("backward: loss belongs to another graph");
  if (graph.value(loss.id).size() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_str(graph.value(loss.id).shape()));

  Gradients out;
  out.grads_.resize(graph.size());
  if (!graph.requires_grad(loss.id)) return out;

  std::vector<std::optional<Tensor>> grads(loss.id + 1);
  grads[loss.id] = Tensor(graph.value(loss.id).shape(), 1.0);
  std::vector<Tensor*> in_grads;

  for (NodeId k = loss.id + 1; k-- > 0;) {
    if (!grads[k] || !graph.requires_grad(k)) continue;
    if (graph.kind(k) == OpKind::leaf) {
      out.grads_[k] = std::move(grads[k]);
      continue;
    }
    const auto inputs = graph.inputs(k);
    in_grads.assign(inputs.size(), nullptr);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const NodeId in = inputs[i];
      if (!graph.requires_grad(in)) continue;
      if (!grads[in]) grads[in] = Tensor(graph.value(in).shape(), 0.0);
      in_grads[i] = &*grads[in];
    }
    if (visit) visit(k);
    graph.backward_fn(k)(graph, k, *grads[k], in_grads);
    grads[k].reset();
  }
  return out;
}

}  // namespace aligngan
