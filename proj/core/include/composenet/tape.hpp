#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "composenet/params.hpp"
#include "composenet/tensor.hpp"

namespace composenet {

using GradMap = std::map<std::string, Tensor>;

// Reverse-mode tape. Values are computed eagerly as operations are recorded;
// backward() replays the tape once in reverse and accumulates one gradient
// tensor per trainable parameter name. Frozen parameters participate in the
// forward pass but receive no gradient entry and stop backpropagation.
//
// Nodes are appended in execution order, so the record order is a valid
// topological order for the reverse sweep. The same parameter name may be
// recorded any number of times; gradients accumulate across uses.
class Tape {
public:
  using NodeId = int32_t;

  explicit Tape(const ParamSet& params) : params_(&params) {}

  // Inputs/constants: values with no gradient.
  NodeId constant(Tensor value);
  // Named parameter lookup; frozen entries behave like constants.
  NodeId param(const std::string& name);

  // y = act(W x + b) with W, b looked up as `layer`.weight / `layer`.bias.
  NodeId dense(NodeId x, const std::string& layer, Activation act);
  NodeId dense(NodeId x, NodeId weight, NodeId bias, Activation act);

  NodeId concat(NodeId a, NodeId b);
  NodeId relu(NodeId x);
  NodeId softmax(NodeId logits);
  NodeId log_softmax(NodeId logits);
  NodeId pick(NodeId x, int index);  // scalar y = x[index]
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);  // elementwise
  NodeId scale(NodeId x, float c);
  NodeId square(NodeId x);
  NodeId sum(NodeId x);  // scalar

  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  float scalar_value(NodeId id) const;

  // Gradient of a scalar loss with respect to every reachable trainable
  // parameter. ConfigError if `loss` is not a scalar.
  GradMap backward(NodeId loss) const;

  size_t size() const { return nodes_.size(); }
  void reset() { nodes_.clear(); }

private:
  enum class Op {
    Const,
    Param,
    Dense,
    Concat,
    Relu,
    Softmax,
    LogSoftmax,
    Pick,
    Add,
    Sub,
    Mul,
    Scale,
    Square,
    Sum,
  };

  struct Node {
    Op op;
    NodeId a = -1, b = -1, c = -1;  // operands (Dense: x, weight, bias)
    int index = 0;                  // Pick
    float factor = 0.0f;            // Scale
    Activation act = Activation::None;
    std::string name;               // Param
    bool trainable = false;         // Param
    Tensor value;
  };

  NodeId push(Node n);
  const Node& node(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }
  void check_id(NodeId id) const;

  const ParamSet* params_;
  std::vector<Node> nodes_;
};

}  // namespace composenet
