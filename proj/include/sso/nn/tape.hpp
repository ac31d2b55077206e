#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "sso/nn/tensor.hpp"

namespace sso::nn {

// Reverse-mode tape over DenseArray values. Nodes are created in topological
// order by construction; backward walks ids in reverse. Leaf nodes may
// reference external storage (parameters, inputs) without copying; their
// gradients stay local to the tape, so one parameter set can feed many tapes.
class Tape {
 public:
  using NodeId = int;
  static constexpr NodeId kNone = -1;

  // Non-trainable leaf over external data. The pointee must outlive the tape.
  NodeId input(const DenseArray* external);

  // Non-trainable leaf that owns its value.
  NodeId input_owned(DenseArray value);

  // Trainable leaf; slot identifies the parameter for gradient export.
  NodeId param(const DenseArray* external, int slot);

  // y = x @ w + b (b broadcast over rows); x folded to 2-d.
  NodeId linear(NodeId x, NodeId w, NodeId b);

  NodeId add(NodeId a, NodeId b);

  // Exact GELU, x * Phi(x).
  NodeId gelu(NodeId x);

  // Row-wise normalization over the last dimension with affine parameters.
  NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, double eps = 1e-5);

  // Multi-head self-attention core over per-sample token blocks. q, k, v are
  // (batch*tokens) x dim; heads split the feature dimension. When capture is
  // non-null the softmax rows are copied out as one
  // {batch*heads*tokens, tokens} array.
  NodeId attention(NodeId q, NodeId k, NodeId v, int batch, int tokens, int heads,
                   DenseArray* capture = nullptr);

  // Builds the encoder input: class token + positional rows, visual rows, and
  // optionally four cinematology rows per sample. cls is 1 x dim, vis is
  // (batch*num_visual) x dim, each cine entry is batch x dim, pos is
  // tokens x dim with layout [class, visual..., cine...].
  NodeId assemble_tokens(NodeId cls, NodeId vis, const std::vector<NodeId>& cine,
                         NodeId pos, int batch);

  // Extracts row b*tokens of each sample block: (batch x dim).
  NodeId select_first_token(NodeId x, int batch, int tokens);

  const DenseArray& value(NodeId id) const;

  // Gradient buffer, allocated as zeros on first access.
  DenseArray& grad(NodeId id);
  bool has_grad(NodeId id) const;

  // Seeds root with seed_grad and propagates to all reachable nodes.
  void backward(NodeId root, const DenseArray& seed_grad);

  // Adds every parameter leaf's gradient into grads[slot]. Buffers must be
  // pre-sized to the parameter shapes.
  void export_param_grads(std::vector<DenseArray>& grads) const;

  int num_nodes() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    const DenseArray* ref = nullptr;  // leaves
    DenseArray owned;                 // computed values
    DenseArray grad_buf;
    bool grad_set = false;
    int slot = -1;
    std::vector<NodeId> inputs;
    std::function<void(Tape&, NodeId)> back;
  };

  const DenseArray& node_value(const Node& n) const { return n.ref ? *n.ref : n.owned; }
  NodeId push(Node node);
  void check_id(NodeId id) const;

  std::vector<Node> nodes_;
};

}  // namespace sso::nn
