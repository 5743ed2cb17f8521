// SPDX-License-Identifier: Apache-2.0
#include "dartnet/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dartnet {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

[[noreturn]] void shape_error(OpKind kind, const std::string& detail) {
  throw std::invalid_argument(std::string(op_name(kind)) + ": " + detail);
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::concat: return "concat";
    case OpKind::scale: return "scale";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::tanh_: return "tanh";
    case OpKind::hadamard: return "hadamard";
    case OpKind::mean_rows: return "mean_rows";
    case OpKind::affine: return "affine";
    case OpKind::row: return "row";
    case OpKind::rows: return "rows";
    case OpKind::stack_rows: return "stack_rows";
    case OpKind::slice: return "slice";
    case OpKind::sum: return "sum";
    case OpKind::mse: return "mse";
    case OpKind::cross_entropy: return "cross_entropy";
  }
  return "?";
}

Tensor Tape::emplace(OpKind kind, Shape shape, std::vector<double> values,
                     std::vector<int> inputs, std::vector<std::size_t> aux, double factor) {
  Node node;
  node.kind = kind;
  node.shape = shape;
  node.values = std::make_shared<const std::vector<double>>(std::move(values));
  node.inputs = std::move(inputs);
  node.aux = std::move(aux);
  node.factor = factor;
  node.requires_grad = false;
  for (int in : node.inputs) {
    if (nodes_[static_cast<std::size_t>(in)].requires_grad) node.requires_grad = true;
  }
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  return Tensor(std::move(shape), nodes_.back().values, nodes_.back().requires_grad, id);
}

const Tape::Node& Tape::node_of(const Tensor& t) const {
  if (!t.defined() || t.node_id() < 0 ||
      static_cast<std::size_t>(t.node_id()) >= nodes_.size()) {
    throw std::invalid_argument("tape: tensor is not recorded on this tape");
  }
  return nodes_[static_cast<std::size_t>(t.node_id())];
}

Tensor Tape::leaf(const Array& array, bool requires_grad) {
  Node node;
  node.kind = OpKind::leaf;
  node.shape = array.shape;
  node.values = std::make_shared<const std::vector<double>>(array.values);
  node.requires_grad = requires_grad;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  return Tensor(array.shape, nodes_.back().values, requires_grad, id);
}

Tensor Tape::constant(Shape shape, std::vector<double> values) {
  return leaf(Array(std::move(shape), std::move(values)), false);
}

Tensor Tape::scalar_constant(double value) { return constant({1}, {value}); }

Tensor Tape::zeros(const Shape& shape) { return constant(shape, std::vector<double>(shape_size(shape), 0.0)); }

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  node_of(a);
  node_of(b);
  if (b.rank() != 2) shape_error(OpKind::matmul, "rhs must be a matrix, got " + shape_str(b.shape()));
  const bool vec = a.rank() == 1;
  if (!vec && a.rank() != 2) {
    shape_error(OpKind::matmul, "lhs must be a vector or matrix, got " + shape_str(a.shape()));
  }
  const std::size_t m = vec ? 1 : a.shape()[0];
  const std::size_t k = vec ? a.shape()[0] : a.shape()[1];
  const std::size_t n = b.shape()[1];
  if (b.shape()[0] != k) {
    shape_error(OpKind::matmul, "inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  Shape shape = vec ? Shape{n} : Shape{m, n};
  return emplace(OpKind::matmul, std::move(shape), std::move(out), {a.node_id(), b.node_id()});
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  node_of(a);
  node_of(b);
  if (a.shape() != b.shape()) {
    shape_error(OpKind::add, "shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return emplace(OpKind::add, a.shape(), std::move(out), {a.node_id(), b.node_id()});
}

Tensor Tape::concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) shape_error(OpKind::concat, "no inputs");
  const std::size_t rank = parts.front().rank();
  if (rank != 1 && rank != 2) {
    shape_error(OpKind::concat, "inputs must be vectors or matrices, got " + shape_str(parts.front().shape()));
  }
  const std::size_t rows = rank == 2 ? parts.front().shape()[0] : 1;
  std::size_t total_cols = 0;
  std::vector<int> input_ids;
  for (const Tensor& part : parts) {
    node_of(part);
    if (part.rank() != rank || (rank == 2 && part.shape()[0] != rows)) {
      shape_error(OpKind::concat, "incompatible input " + shape_str(part.shape()));
    }
    total_cols += rank == 2 ? part.shape()[1] : part.shape()[0];
    input_ids.push_back(part.node_id());
  }
  std::vector<double> out(rows * total_cols);
  std::size_t col = 0;
  for (const Tensor& part : parts) {
    const std::size_t cols = rank == 2 ? part.shape()[1] : part.shape()[0];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) out[r * total_cols + col + c] = part.values()[r * cols + c];
    }
    col += cols;
  }
  Shape shape = rank == 2 ? Shape{rows, total_cols} : Shape{total_cols};
  return emplace(OpKind::concat, std::move(shape), std::move(out), std::move(input_ids));
}

Tensor Tape::scale(const Tensor& a, double factor) {
  node_of(a);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * factor;
  return emplace(OpKind::scale, a.shape(), std::move(out), {a.node_id()}, {}, factor);
}

Tensor Tape::sigmoid(const Tensor& a) {
  node_of(a);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(a.values()[i]);
  return emplace(OpKind::sigmoid, a.shape(), std::move(out), {a.node_id()});
}

Tensor Tape::tanh(const Tensor& a) {
  node_of(a);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.values()[i]);
  return emplace(OpKind::tanh_, a.shape(), std::move(out), {a.node_id()});
}

Tensor Tape::hadamard(const Tensor& a, const Tensor& b) {
  node_of(a);
  node_of(b);
  if (a.shape() != b.shape()) {
    shape_error(OpKind::hadamard, "shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return emplace(OpKind::hadamard, a.shape(), std::move(out), {a.node_id(), b.node_id()});
}

Tensor Tape::mean_rows(const Tensor& m) {
  node_of(m);
  if (m.rank() != 2) shape_error(OpKind::mean_rows, "input must be a matrix, got " + shape_str(m.shape()));
  const std::size_t rows = m.shape()[0];
  const std::size_t cols = m.shape()[1];
  if (rows == 0) shape_error(OpKind::mean_rows, "mean over zero rows");
  std::vector<double> out(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += m.values()[r * cols + c];
  }
  for (std::size_t c = 0; c < cols; ++c) out[c] /= static_cast<double>(rows);
  return emplace(OpKind::mean_rows, {cols}, std::move(out), {m.node_id()});
}

Tensor Tape::affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  node_of(x);
  node_of(w);
  node_of(b);
  if (w.rank() != 2) shape_error(OpKind::affine, "weight must be a matrix, got " + shape_str(w.shape()));
  const std::size_t q = w.shape()[1];
  if (b.shape() != Shape{q}) {
    shape_error(OpKind::affine, "bias " + shape_str(b.shape()) + " does not match weight " + shape_str(w.shape()));
  }
  const bool vec = x.rank() == 1;
  const std::size_t m = vec ? 1 : x.shape()[0];
  const std::size_t p = vec ? x.shape()[0] : x.shape()[1];
  if (!vec && x.rank() != 2) shape_error(OpKind::affine, "input must be a vector or matrix");
  if (w.shape()[0] != p) {
    shape_error(OpKind::affine, "inner dimensions differ: " + shape_str(x.shape()) + " x " + shape_str(w.shape()));
  }
  std::vector<double> out(m * q);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < q; ++j) out[i * q + j] = b.values()[j];
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t r = 0; r < p; ++r) {
      const double xir = x.values()[i * p + r];
      if (xir == 0.0) continue;
      const double* wrow = w.values().data() + r * q;
      double* orow = out.data() + i * q;
      for (std::size_t j = 0; j < q; ++j) orow[j] += xir * wrow[j];
    }
  }
  Shape shape = vec ? Shape{q} : Shape{m, q};
  return emplace(OpKind::affine, std::move(shape), std::move(out), {x.node_id(), w.node_id(), b.node_id()});
}

Tensor Tape::row(const Tensor& table, std::size_t index) {
  node_of(table);
  if (table.rank() != 2) shape_error(OpKind::row, "table must be a matrix, got " + shape_str(table.shape()));
  if (index >= table.shape()[0]) {
    shape_error(OpKind::row, "index " + std::to_string(index) + " out of " + std::to_string(table.shape()[0]));
  }
  const std::size_t d = table.shape()[1];
  std::vector<double> out(table.values().begin() + static_cast<std::ptrdiff_t>(index * d),
                          table.values().begin() + static_cast<std::ptrdiff_t>((index + 1) * d));
  return emplace(OpKind::row, {d}, std::move(out), {table.node_id()}, {index});
}

Tensor Tape::rows(const Tensor& table, const std::vector<std::size_t>& indices) {
  node_of(table);
  if (table.rank() != 2) shape_error(OpKind::rows, "table must be a matrix, got " + shape_str(table.shape()));
  if (indices.empty()) shape_error(OpKind::rows, "no indices");
  const std::size_t d = table.shape()[1];
  std::vector<double> out;
  out.reserve(indices.size() * d);
  for (std::size_t index : indices) {
    if (index >= table.shape()[0]) {
      shape_error(OpKind::rows, "index " + std::to_string(index) + " out of " + std::to_string(table.shape()[0]));
    }
    out.insert(out.end(), table.values().begin() + static_cast<std::ptrdiff_t>(index * d),
               table.values().begin() + static_cast<std::ptrdiff_t>((index + 1) * d));
  }
  return emplace(OpKind::rows, {indices.size(), d}, std::move(out), {table.node_id()}, indices);
}

Tensor Tape::stack_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) shape_error(OpKind::stack_rows, "no inputs");
  const std::size_t n = parts.front().size();
  std::vector<double> out;
  out.reserve(parts.size() * n);
  std::vector<int> input_ids;
  for (const Tensor& part : parts) {
    node_of(part);
    if (part.rank() != 1 || part.size() != n) {
      shape_error(OpKind::stack_rows, "inputs must be vectors of equal length, got " + shape_str(part.shape()));
    }
    out.insert(out.end(), part.values().begin(), part.values().end());
    input_ids.push_back(part.node_id());
  }
  return emplace(OpKind::stack_rows, {parts.size(), n}, std::move(out), std::move(input_ids));
}

Tensor Tape::slice(const Tensor& v, std::size_t offset, std::size_t length) {
  node_of(v);
  if (v.rank() != 1) shape_error(OpKind::slice, "input must be a vector, got " + shape_str(v.shape()));
  if (offset + length > v.size() || length == 0) {
    shape_error(OpKind::slice, "range [" + std::to_string(offset) + "," + std::to_string(offset + length) +
                                   ") out of " + std::to_string(v.size()));
  }
  std::vector<double> out(v.values().begin() + static_cast<std::ptrdiff_t>(offset),
                          v.values().begin() + static_cast<std::ptrdiff_t>(offset + length));
  return emplace(OpKind::slice, {length}, std::move(out), {v.node_id()}, {offset, length});
}

Tensor Tape::sum(const Tensor& a) {
  node_of(a);
  double total = 0.0;
  for (double v : a.values()) total += v;
  return emplace(OpKind::sum, {1}, {total}, {a.node_id()});
}

Tensor Tape::mse(const Tensor& pred, const Tensor& target) {
  node_of(pred);
  node_of(target);
  if (pred.shape() != target.shape()) {
    shape_error(OpKind::mse, "shapes differ: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.values()[i] - target.values()[i];
    total += d * d;
  }
  total /= static_cast<double>(pred.size());
  return emplace(OpKind::mse, {1}, {total}, {pred.node_id(), target.node_id()});
}

Tensor Tape::cross_entropy(const Tensor& logits, std::size_t class_index) {
  node_of(logits);
  if (logits.rank() != 1) {
    shape_error(OpKind::cross_entropy, "logits must be a vector, got " + shape_str(logits.shape()));
  }
  if (class_index >= logits.size()) {
    shape_error(OpKind::cross_entropy,
                "class " + std::to_string(class_index) + " out of " + std::to_string(logits.size()));
  }
  const auto& z = logits.values();
  const double zmax = *std::max_element(z.begin(), z.end());
  double acc = 0.0;
  for (double v : z) acc += std::exp(v - zmax);
  const double loss = zmax + std::log(acc) - z[class_index];
  return emplace(OpKind::cross_entropy, {1}, {loss}, {logits.node_id()}, {class_index});
}

Tensor Tape::apply(OpKind kind, const std::vector<Tensor>& inputs) {
  const auto want = [&](std::size_t n) {
    if (inputs.size() != n) {
      shape_error(kind, "expected " + std::to_string(n) + " inputs, got " + std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::matmul: want(2); return matmul(inputs[0], inputs[1]);
    case OpKind::add: want(2); return add(inputs[0], inputs[1]);
    case OpKind::concat: return concat(inputs);
    case OpKind::scale: want(2); return scale(inputs[0], inputs[1].scalar());
    case OpKind::sigmoid: want(1); return sigmoid(inputs[0]);
    case OpKind::tanh_: want(1); return tanh(inputs[0]);
    case OpKind::hadamard: want(2); return hadamard(inputs[0], inputs[1]);
    case OpKind::mean_rows: want(1); return mean_rows(inputs[0]);
    case OpKind::affine: want(3); return affine(inputs[0], inputs[1], inputs[2]);
    case OpKind::stack_rows: return stack_rows(inputs);
    case OpKind::sum: want(1); return sum(inputs[0]);
    case OpKind::mse: want(2); return mse(inputs[0], inputs[1]);
    default: break;
  }
  shape_error(kind, "kind is not dispatchable through apply");
}

void Tape::backward(const Tensor& root) {
  const Node& root_node = node_of(root);
  if (shape_size(root_node.shape) != 1) {
    throw std::invalid_argument("backward: root must be scalar, got shape " + shape_str(root_node.shape));
  }
  grads_.assign(nodes_.size(), {});
  grads_[static_cast<std::size_t>(root.node_id())] = {1.0};
  for (int id = root.node_id(); id >= 0; --id) {
    if (grads_[static_cast<std::size_t>(id)].empty()) continue;
    if (!nodes_[static_cast<std::size_t>(id)].requires_grad) continue;
    backward_node(id);
  }
}

void Tape::backward_node(int id) {
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  if (node.kind == OpKind::leaf) return;
  const std::vector<double>& g = grads_[static_cast<std::size_t>(id)];

  auto grad_buf = [&](int input) -> std::vector<double>& {
    auto& slot = grads_[static_cast<std::size_t>(input)];
    if (slot.empty()) slot.assign(nodes_[static_cast<std::size_t>(input)].values->size(), 0.0);
    return slot;
  };
  auto wants = [&](int input) { return nodes_[static_cast<std::size_t>(input)].requires_grad; };
  auto value_of = [&](int input) -> const std::vector<double>& {
    return *nodes_[static_cast<std::size_t>(input)].values;
  };
  auto shape_of = [&](int input) -> const Shape& { return nodes_[static_cast<std::size_t>(input)].shape; };

  switch (node.kind) {
    case OpKind::matmul: {
      const int ia = node.inputs[0], ib = node.inputs[1];
      const bool vec = shape_of(ia).size() == 1;
      const std::size_t m = vec ? 1 : shape_of(ia)[0];
      const std::size_t k = vec ? shape_of(ia)[0] : shape_of(ia)[1];
      const std::size_t n = shape_of(ib)[1];
      if (wants(ia)) {
        auto& da = grad_buf(ia);
        const auto& bv = value_of(ib);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
            da[i * k + p] += acc;
          }
        }
      }
      if (wants(ib)) {
        auto& db = grad_buf(ib);
        const auto& av = value_of(ia);
        for (std::size_t p = 0; p < k; ++p) {
          for (std::size_t i = 0; i < m; ++i) {
            const double apI = av[i * k + p];
            if (apI == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) db[p * n + j] += apI * g[i * n + j];
          }
        }
      }
      break;
    }
    case OpKind::add: {
      for (int input : node.inputs) {
        if (!wants(input)) continue;
        auto& d = grad_buf(input);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
      break;
    }
    case OpKind::concat: {
      const bool matrix = node.shape.size() == 2;
      const std::size_t rows = matrix ? node.shape[0] : 1;
      const std::size_t total_cols = matrix ? node.shape[1] : node.shape[0];
      std::size_t col = 0;
      for (int input : node.inputs) {
        const Shape& s = shape_of(input);
        const std::size_t cols = matrix ? s[1] : s[0];
        if (wants(input)) {
          auto& d = grad_buf(input);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += g[r * total_cols + col + c];
          }
        }
        col += cols;
      }
      break;
    }
    case OpKind::scale: {
      const int ia = node.inputs[0];
      if (wants(ia)) {
        auto& d = grad_buf(ia);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * node.factor;
      }
      break;
    }
    case OpKind::sigmoid: {
      const int ia = node.inputs[0];
      if (wants(ia)) {
        auto& d = grad_buf(ia);
        const auto& y = *node.values;
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
      }
      break;
    }
    case OpKind::tanh_: {
      const int ia = node.inputs[0];
      if (wants(ia)) {
        auto& d = grad_buf(ia);
        const auto& y = *node.values;
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
      }
      break;
    }
    case OpKind::hadamard: {
      const int ia = node.inputs[0], ib = node.inputs[1];
      if (wants(ia)) {
        auto& d = grad_buf(ia);
        const auto& bv = value_of(ib);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
      }
      if (wants(ib)) {
        auto& d = grad_buf(ib);
        const auto& av = value_of(ia);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
      }
      break;
    }
    case OpKind::mean_rows: {
      const int ia = node.inputs[0];
      if (wants(ia)) {
        auto& d = grad_buf(ia);
        const std::size_t rows = shape_of(ia)[0];
        const std::size_t cols = shape_of(ia)[1];
        const double inv = 1.0 / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) d[r * cols + c] += g[c] * inv;
        }
      }
      break;
    }
    case OpKind::affine: {
      const int ix = node.inputs[0], iw = node.inputs[1], ib = node.inputs[2];
      const bool vec = shape_of(ix).size() == 1;
      const std::size_t m = vec ? 1 : shape_of(ix)[0];
      const std::size_t p = vec ? shape_of(ix)[0] : shape_of(ix)[1];
      const std::size_t q = shape_of(iw)[1];
      if (wants(ix)) {
        auto& dx = grad_buf(ix);
        const auto& wv = value_of(iw);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t r = 0; r < p; ++r) {
            double acc = 0.0;
            for (std::size_t j = 0; j < q; ++j) acc += g[i * q + j] * wv[r * q + j];
            dx[i * p + r] += acc;
          }
        }
      }
      if (wants(iw)) {
        auto& dw = grad_buf(iw);
        const auto& xv = value_of(ix);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t r = 0; r < p; ++r) {
            const double xir = xv[i * p + r];
            if (xir == 0.0) continue;
            for (std::size_t j = 0; j < q; ++j) dw[r * q + j] += xir * g[i * q + j];
          }
        }
      }
      if (wants(ib)) {
        auto& db = grad_buf(ib);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < q; ++j) db[j] += g[i * q + j];
        }
      }
      break;
    }
    case OpKind::row: {
      const int it = node.inputs[0];
      if (wants(it)) {
        auto& dt = grad_buf(it);
        const std::size_t d = shape_of(it)[1];
        const std::size_t base = node.aux[0] * d;
        for (std::size_t c = 0; c < d; ++c) dt[base + c] += g[c];
      }
      break;
    }
    case OpKind::rows: {
      const int it = node.inputs[0];
      if (wants(it)) {
        auto& dt = grad_buf(it);
        const std::size_t d = shape_of(it)[1];
        for (std::size_t r = 0; r < node.aux.size(); ++r) {
          const std::size_t base = node.aux[r] * d;
          for (std::size_t c = 0; c < d; ++c) dt[base + c] += g[r * d + c];
        }
      }
      break;
    }
    case OpKind::stack_rows: {
      const std::size_t n = node.shape[1];
      for (std::size_t r = 0; r < node.inputs.size(); ++r) {
        const int input = node.inputs[r];
        if (!wants(input)) continue;
        auto& d = grad_buf(input);
        for (std::size_t c = 0; c < n; ++c) d[c] += g[r * n + c];
      }
      break;
    }
    case OpKind::slice: {
      const int ia = node.inputs[0];
      if (wants(ia)) {
        auto& d = grad_buf(ia);
        const std::size_t offset = node.aux[0];
        for (std::size_t i = 0; i < g.size(); ++i) d[offset + i] += g[i];
      }
      break;
    }
    case OpKind::sum: {
      const int ia = node.inputs[0];
      if (wants(ia)) {
        auto& d = grad_buf(ia);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0];
      }
      break;
    }
    case OpKind::mse: {
      const int ip = node.inputs[0], it = node.inputs[1];
      const auto& pv = value_of(ip);
      const auto& tv = value_of(it);
      const double scale = 2.0 / static_cast<double>(pv.size());
      if (wants(ip)) {
        auto& d = grad_buf(ip);
        for (std::size_t i = 0; i < pv.size(); ++i) d[i] += g[0] * scale * (pv[i] - tv[i]);
      }
      if (wants(it)) {
        auto& d = grad_buf(it);
        for (std::size_t i = 0; i < pv.size(); ++i) d[i] += g[0] * scale * (tv[i] - pv[i]);
      }
      break;
    }
    case OpKind::cross_entropy: {
      const int iz = node.inputs[0];
      if (wants(iz)) {
        auto& d = grad_buf(iz);
        const auto& z = value_of(iz);
        const double zmax = *std::max_element(z.begin(), z.end());
        double acc = 0.0;
        for (double v : z) acc += std::exp(v - zmax);
        for (std::size_t i = 0; i < z.size(); ++i) {
          const double soft = std::exp(z[i] - zmax) / acc;
          d[i] += g[0] * (soft - (i == node.aux[0] ? 1.0 : 0.0));
        }
      }
      break;
    }
    case OpKind::leaf:
      break;
  }
}

std::vector<double> Tape::grad(const Tensor& t) const {
  const Node& node = node_of(t);
  const auto id = static_cast<std::size_t>(t.node_id());
  if (id < grads_.size() && !grads_[id].empty()) return grads_[id];
  return std::vector<double>(node.values->size(), 0.0);
}

bool Tape::has_grad(const Tensor& t) const {
  node_of(t);
  const auto id = static_cast<std::size_t>(t.node_id());
  return id < grads_.size() && !grads_[id].empty();
}

}  // namespace dartnet
