// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace dartnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Host-side dense array. Model parameters live in Array objects between
/// training steps; a Tape binds them as leaf tensors for one forward/backward.
struct Array {
  Shape shape;
  std::vector<double> values;

  Array() = default;
  Array(Shape s, std::vector<double> v);

  static Array zeros(const Shape& shape);
  static Array full(const Shape& shape, double fill);

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; the underlying
/// buffer is immutable and shared with the tape node that produced it.
/// A Tensor is only meaningful together with the tape that created it.
class Tensor {
 public:
  Tensor() = default;

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_ ? data_->size() : 0; }
  const std::vector<double>& values() const { return *data_; }
  double scalar() const;  // requires size() == 1
  bool requires_grad() const { return requires_grad_; }
  int node_id() const { return node_id_; }

  Array to_array() const { return Array(shape_, *data_); }

 private:
  friend class Tape;
  Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data,
         bool requires_grad, int node_id)
      : shape_(std::move(shape)),
        data_(std::move(data)),
        requires_grad_(requires_grad),
        node_id_(node_id) {}

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  bool requires_grad_ = false;
  int node_id_ = -1;
};

}  // namespace dartnet
