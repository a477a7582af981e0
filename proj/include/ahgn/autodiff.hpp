#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ahgn/tensor.hpp"

namespace ahgn {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value().item(); }
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Linear record of a computation. Nodes are appended in evaluation order, so
// reverse index order is a valid topological order for the backward sweep.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);
  Var record(Tensor value, std::span<const Var> parents, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient buffer of a node, allocated (zero) on first touch.
  Tensor& grad(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

  // Runs reverse-mode accumulation from a scalar node. Throws ContractError for
  // non-scalar roots.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ---- differentiable operations -------------------------------------------
// All operands must live on the same tape. Shapes are explicit: the only
// implicit broadcast is scalar (1x1) against a tensor in add/sub/mul.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var one_minus(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
Var softmax(Var a, int axis);
Var log_sum_exp(Var a);  // over all entries -> 1x1
Var concat(std::span<const Var> parts, int axis);
Var sum(Var a, int axis);
Var mean(Var a, int axis);
Var sum_all(Var a);
Var mean_all(Var a);
Var repeat_rows(Var row, std::size_t n);
Var add_row(Var a, Var row);  // adds a 1xc row to every row of a
Var take_row(Var a, std::size_t r);
Var stack_rows(std::span<const Var> rows);
Var row_normalize(Var a);  // each row divided by its L2 norm
Var cosine_distance(Var u, Var v);
Var cosine_cost(Var a, Var b);  // 1 - cos between rows of a and rows of b

// y = (1 - gate) * x + gate * message, elementwise.
Var gated_mix(Var x, Var message, Var gate);

// Numerically clamped logistic function: result lies strictly inside (0, 1).
double stable_sigmoid(double x);

}  // namespace ahgn
