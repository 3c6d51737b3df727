#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>

#include "avq/tensor/matrix.hpp"

namespace avq {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of primitive applications. Nodes are appended in
/// evaluation order, so node ids are a topological order and the reverse sweep
/// walks ids from the loss downwards. A tape is rebuilt for every forward pass.
class Tape {
 public:
  /// Receives the gradient of the loss w.r.t. the node's output and pushes
  /// contributions into the node's inputs via accumulate().
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf that references caller-owned storage (no copy). The storage must
  /// outlive the tape and stay unmodified until backward() returns.
  Var parameter(const Matrix& value);
  /// Leaf that owns its value and receives a gradient.
  Var variable(Matrix value);

  /// Appends an interior node. `backward` is dropped when no input needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Matrix& value(const Var& v) const;
  bool requires_grad(const Var& v) const;

  void accumulate(const Var& v, const Matrix& grad);
  void accumulate(const Var& v, Matrix&& grad);

  /// Reverse sweep from a 1x1 loss node (seed gradient 1). Throws
  /// ContractError for a non-scalar loss.
  void backward(const Var& loss);

  /// Gradient of the last backward() w.r.t. `v`; zeros if `v` was never reached.
  Matrix grad(const Var& v) const;
  /// Null when `v` was never reached.
  const Matrix* grad_if_any(const Var& v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* external = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;

    const Matrix& value() const { return external ? *external : owned; }
  };

  Node& node(const Var& v);
  const Node& node(const Var& v) const;

  std::deque<Node> nodes_;
};

}  // namespace avq
