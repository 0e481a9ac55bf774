#include "gcf/numerics/tape.hpp"

#include "gcf/errors.hpp"

namespace gcf::num {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->value(*this);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(*this); }

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Tape::Node& Tape::node(Var v) {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw ContractError("Var does not belong to this tape");
  return nodes_[v.id_];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw ContractError("Var does not belong to this tape");
  return nodes_[v.id_];
}

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::constant_ref(const Tensor& value) {
  Node n;
  n.ref = &value;
  return push(std::move(n));
}

Var Tape::parameter(const Tensor& value) {
  Node n;
  n.ref = &value;
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backprop backprop) {
  Node n;
  n.owned = std::move(value);
  for (const Var& in : inputs) {
    if (node(in).requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  if (n.requires_grad) n.backprop = std::move(backprop);
  return push(std::move(n));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, Backprop backprop) {
  Node n;
  n.owned = std::move(value);
  for (const Var& in : inputs) {
    if (node(in).requires_grad) {
      n.requires_grad = true;
      break;
    }
  }
  if (n.requires_grad) n.backprop = std::move(backprop);
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (backward_done_) throw ContractError("backward() called twice on the same tape without reset()");
  Node& out = node(loss);
  if (out.value().size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_str(out.value().shape()));
  }
  backward_done_ = true;
  if (!out.requires_grad) return;
  out.grad = Tensor(out.value().shape(), 1.0);
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backprop || n.grad.empty()) continue;
    n.backprop(*this, Var(this, i), n.grad);
  }
}

bool Tape::has_grad(Var v) const {
  const Node& n = node(v);
  return n.requires_grad;
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.requires_grad) throw ContractError("node does not track gradients");
  if (!backward_done_) throw ContractError("grad() before backward()");
  if (n.grad.empty()) {
    // Node was unreachable from the loss; its gradient is zero.
    const_cast<Node&>(n).grad = Tensor(n.value().shape(), 0.0);
  }
  return n.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    if (!g.same_shape(n.value())) {
      throw ShapeError("adjoint shape " + shape_str(g.shape()) + " vs value " + shape_str(n.value().shape()));
    }
    n.grad = g;
    return;
  }
  auto dst = n.grad.data();
  auto src = g.data();
  if (dst.size() != src.size()) throw ShapeError("adjoint size mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor& Tape::grad_buffer(Var v) {
  Node& n = node(v);
  if (n.grad.empty()) n.grad = Tensor(n.value().shape(), 0.0);
  return n.grad;
}

const Tensor& Tape::value(Var v) const { return node(v).value(); }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

void Tape::reset() {
  nodes_.clear();
  backward_done_ = false;
}

}  // namespace gcf::num
