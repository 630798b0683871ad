#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "wsct/nn/params.hpp"
#include "wsct/nn/tensor.hpp"

namespace wsct::nn {

using NodeId = int;

// How rectifiers pass the backward signal.
//   kGradient: g * [pre > 0]                (ordinary chain rule)
//   kGuided:   g * [pre > 0] * [g > 0]      (guided backpropagation)
enum class BackwardMode { kGradient, kGuided };

// One recorded rectifier crossing of the last backward pass: the forward
// pre-activation and the signal sent back through it after gating.
template <typename T>
struct RectifierTrace {
  NodeId node = -1;
  const Tensor<T>* pre_activation = nullptr;
  Tensor<T> incoming;  // signal arriving from above
  Tensor<T> gated;     // signal passed below
};

// Forward tape over a fixed parameter set. Every op evaluates eagerly and
// records how to propagate a signal back to its inputs; a tape can be
// back-propagated many times from different outputs and seeds.
template <typename T>
class Graph {
 public:
  explicit Graph(const ParamStore<T>& params) : params_(&params) {}

  NodeId input(Tensor<T> value);
  NodeId conv(NodeId x, const ConvLayer& layer);
  NodeId relu(NodeId x);
  NodeId maxpool2(NodeId x);
  NodeId upsample2(NodeId x);
  NodeId concat(NodeId a, NodeId b);
  NodeId slice(NodeId x, int first_channel, int count);
  NodeId sigmoid(NodeId x);
  NodeId tanh(NodeId x);

  const Tensor<T>& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  int size() const { return static_cast<int>(nodes_.size()); }

  // Propagates `seed` from `output` down to every node it depends on.
  // Parameter gradients are accumulated into `grads` when non-null (skipped
  // otherwise, which is cheaper). Clears signals from any previous pass.
  void backward(NodeId output, const Tensor<T>& seed, BackwardMode mode,
                ParamGrads<T>* grads = nullptr);
  // Several outputs seeded at once (sum of their signals).
  void backward(const std::vector<std::pair<NodeId, Tensor<T>>>& seeds, BackwardMode mode,
                ParamGrads<T>* grads = nullptr);

  // Backward signal at a node after the last pass; empty tensor when the
  // node received none.
  const Tensor<T>& signal(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  void set_trace_rectifiers(bool on) { trace_rectifiers_ = on; }
  const std::vector<RectifierTrace<T>>& rectifier_traces() const { return traces_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<NodeId> inputs;
    // Pushes this node's grad into its inputs' grads.
    std::function<void(Graph&, Node&, BackwardMode, ParamGrads<T>*)> back;
  };

  NodeId push(Node node);
  Tensor<T>& grad_of(NodeId id);
  Node& node(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }

  const ParamStore<T>* params_;
  std::vector<Node> nodes_;
  bool trace_rectifiers_ = false;
  std::vector<RectifierTrace<T>> traces_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace wsct::nn
