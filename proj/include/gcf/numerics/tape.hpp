#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>

#include "gcf/numerics/tensor.hpp"

namespace gcf::num {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid until the tape
// is reset or destroyed.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Define-by-run gradient tape. Nodes are appended in evaluation order, which
// is a valid topological order, so one reverse sweep computes every adjoint.
class Tape {
 public:
  // Receives the node's own handle and the adjoint of its output; pushes
  // adjoints into its inputs through accumulate()/grad_buffer().
  using Backprop = std::function<void(Tape&, Var self, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Non-owning leaves: the referenced tensor must outlive the tape.
  Var constant_ref(const Tensor& value);
  Var parameter(const Tensor& value);
  // Owning leaf that receives a gradient.
  Var variable(Tensor value);

  // Appends an operation node. The node tracks gradients iff any input does;
  // otherwise `backprop` is dropped.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backprop backprop);
  Var record(Tensor value, const std::vector<Var>& inputs, Backprop backprop);

  void backward(Var loss);
  bool backward_done() const { return backward_done_; }

  bool has_grad(Var v) const;
  // Gradient of a node after backward(). Throws ContractError for nodes that
  // do not track gradients.
  const Tensor& grad(Var v) const;

  // For use inside Backprop callbacks.
  void accumulate(Var v, const Tensor& g);
  Tensor& grad_buffer(Var v);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  void reset();

 private:
  struct Node {
    std::optional<Tensor> owned;
    const Tensor* ref = nullptr;
    Tensor grad;
    bool requires_grad = false;
    Backprop backprop;
    const Tensor& value() const { return owned ? *owned : *ref; }
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(Node n);

  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace gcf::num
