#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "numerics/tensor.hpp"

namespace prectr::num {

class Tape;

// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

// Dynamic reverse-mode tape. Nodes are appended in forward order and
// backward() walks them in exact reverse order.
class Tape {
 public:
  // Called with the node's output value and gradient; pushes gradient into
  // its inputs through add_grad().
  using BackwardFn = std::function<void(Tape&, const Tensor& out, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a parameter; backward() adds its gradient into p.grad.
  // Binding the same parameter twice sums both contributions.
  Var parameter(ParamTensor& p);

  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  const Tensor& value(Var v) const;
  // Gradient of the last backward() pass; zeros if the node was unreachable.
  Tensor grad(Var v) const;
  double scalar(Var v) const;

  bool requires_grad(Var v) const;
  // Gradient buffer for an input; only valid inside a BackwardFn.
  Tensor& grad_buffer(Var v);

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    ParamTensor* param = nullptr;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace prectr::num
