#include "avq/tensor/tape.hpp"

namespace avq {

const Matrix& Var::value() const { return tape_->value(*this); }
bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Tape::Node& Tape::node(const Var& v) {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw ContractError("Var does not belong to this tape");
  return nodes_[v.id_];
}

const Tape::Node& Tape::node(const Var& v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw ContractError("Var does not belong to this tape");
  return nodes_[v.id_];
}

Var Tape::constant(Matrix value) {
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Matrix& value) {
  Node& n = nodes_.emplace_back();
  n.external = &value;
  n.requires_grad = true;
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Matrix value) {
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  n.requires_grad = true;
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& in : inputs) needs = needs || node(in).requires_grad;
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  n.requires_grad = needs;
  if (needs) n.backward = std::move(backward);
  return Var(this, nodes_.size() - 1);
}

const Matrix& Tape::value(const Var& v) const { return node(v).value(); }

bool Tape::requires_grad(const Var& v) const { return node(v).requires_grad; }

void Tape::accumulate(const Var& v, const Matrix& grad) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  if (!grad.same_shape(n.value())) {
    throw DimensionError("gradient shape " + grad.shape() + " does not match value shape " +
                         n.value().shape());
  }
  if (n.has_grad) {
    n.grad += grad;
  } else {
    n.grad = grad;
    n.has_grad = true;
  }
}

void Tape::accumulate(const Var& v, Matrix&& grad) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  if (!grad.same_shape(n.value())) {
    throw DimensionError("gradient shape " + grad.shape() + " does not match value shape " +
                         n.value().shape());
  }
  if (n.has_grad) {
    n.grad += grad;
  } else {
    n.grad = std::move(grad);
    n.has_grad = true;
  }
}

void Tape::backward(const Var& loss) {
  Node& root = node(loss);
  if (root.value().rows() != 1 || root.value().cols() != 1) {
    throw ContractError("backward: loss must be 1x1, got " + root.value().shape());
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Matrix();
  }
  if (!root.requires_grad) return;
  root.grad = Matrix(1, 1, 1.0);
  root.has_grad = true;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
    // Interior gradients are dropped once propagated; the root keeps its seed.
    if (i != loss.id()) {
      n.grad = Matrix();
      n.has_grad = false;
    }
  }
}

Matrix Tape::grad(const Var& v) const {
  const Node& n = node(v);
  if (n.has_grad) return n.grad;
  return Matrix(n.value().rows(), n.value().cols());
}

const Matrix* Tape::grad_if_any(const Var& v) const {
  const Node& n = node(v);
  return n.has_grad ? &n.grad : nullptr;
}

}  // namespace avq
