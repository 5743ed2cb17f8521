// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "dartnet/tensor.hpp"

namespace dartnet {

enum class OpKind {
  leaf,
  matmul,
  add,
  concat,
  scale,
  sigmoid,
  tanh_,
  hadamard,
  mean_rows,
  affine,
  row,
  rows,
  stack_rows,
  slice,
  sum,
  mse,
  cross_entropy,
};

const char* op_name(OpKind kind);

/// Reverse-mode tape over dense double tensors. Operations record nodes in
/// topological order (define-by-run); backward() walks the list in reverse.
/// A tape and its tensors belong to a single thread; independent tapes on
/// independent threads do not share state.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // --- leaves -------------------------------------------------------------
  Tensor leaf(const Array& array, bool requires_grad);
  Tensor constant(const Array& array) { return leaf(array, false); }
  Tensor constant(Shape shape, std::vector<double> values);
  Tensor scalar_constant(double value);
  Tensor zeros(const Shape& shape);

  // --- primitives ---------------------------------------------------------
  // matmul supports {m,k}x{k,n} -> {m,n} and {k}x{k,n} -> {n}.
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor add(const Tensor& a, const Tensor& b);
  // Concatenation along the last axis: vectors end to end, or matrices with
  // equal row counts side by side.
  Tensor concat(const std::vector<Tensor>& parts);
  Tensor scale(const Tensor& a, double factor);
  Tensor sigmoid(const Tensor& a);
  Tensor tanh(const Tensor& a);
  Tensor hadamard(const Tensor& a, const Tensor& b);
  // Mean over the first axis of a nonempty matrix: {m,n} -> {n}.
  Tensor mean_rows(const Tensor& m);
  // x*w + b with b broadcast over rows when x is a matrix.
  Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
  // Row gather from a {n,d} table: one row as a vector, or several as a matrix.
  // Backward scatter-adds into the table, so duplicate indices accumulate.
  Tensor row(const Tensor& table, std::size_t index);
  Tensor rows(const Tensor& table, const std::vector<std::size_t>& indices);
  // Stack equal-length vectors into a matrix, one vector per row.
  Tensor stack_rows(const std::vector<Tensor>& parts);
  Tensor slice(const Tensor& v, std::size_t offset, std::size_t length);
  Tensor sum(const Tensor& a);

  // --- losses -------------------------------------------------------------
  // Mean over all elements of the squared difference.
  Tensor mse(const Tensor& pred, const Tensor& target);
  // -log softmax(logits)[class_index], computed with log-sum-exp shift.
  Tensor cross_entropy(const Tensor& logits, std::size_t class_index);

  // Uniform dispatch over the public primitive set; used by the gradient
  // check sweep. scale takes its factor as a trailing scalar tensor.
  Tensor apply(OpKind kind, const std::vector<Tensor>& inputs);

  // --- differentiation ----------------------------------------------------
  // Seeds d(root)/d(root) = 1 and accumulates gradients into every
  // requires_grad ancestor. root must be scalar-shaped. Resets any
  // gradients from a previous backward call on this tape.
  void backward(const Tensor& root);

  // Gradient of a tensor from the last backward(); zeros if the node was
  // not reached.
  std::vector<double> grad(const Tensor& t) const;
  bool has_grad(const Tensor& t) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    Shape shape;
    std::shared_ptr<const std::vector<double>> values;
    std::vector<int> inputs;
    std::vector<std::size_t> aux;  // indices / offsets / class index
    double factor = 1.0;           // scale only
    bool requires_grad = false;
  };

  Tensor emplace(OpKind kind, Shape shape, std::vector<double> values,
                 std::vector<int> inputs, std::vector<std::size_t> aux = {},
                 double factor = 1.0);
  const Node& node_of(const Tensor& t) const;
  void backward_node(int id);

  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

}  // namespace dartnet
