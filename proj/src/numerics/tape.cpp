#include "numerics/tape.hpp"

#include "common/error.hpp"

namespace prectr::num {

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(ParamTensor& p) {
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  require(value.all_finite(), ErrorKind::Numeric,
           "non-finite value produced in forward pass");
  bool needs = false;
  for (const auto& in : inputs) needs = needs || node(in).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(fn) : BackwardFn{}, nullptr, needs});
  return Var{this, nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
  require(v.tape == this && v.id < nodes_.size(), ErrorKind::Graph,
          "variable does not belong to this tape");
  return nodes_[v.id];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  return n.grad.empty() ? Tensor::zeros_like(n.value) : n.grad;
}

double Tape::scalar(Var v) const {
  const Tensor& t = value(v);
  require(t.size() == 1, ErrorKind::Dimension, "expected a scalar node");
  return t[0];
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor& Tape::grad_buffer(Var v) {
  node(v);
  Node& n = nodes_[v.id];
  if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

void Tape::backward(Var loss) {
  const Node& l = node(loss);
  require(l.value.size() == 1, ErrorKind::Graph, "backward requires a scalar loss");
  for (auto& n : nodes_) n.grad = Tensor{};
  grad_buffer(loss).fill(1.0);

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, n.value, n.grad);
    if (n.param != nullptr) {
      auto dst = n.param->grad.values();
      auto src = n.grad.values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

}  // namespace prectr::num
