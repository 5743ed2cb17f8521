// SPDX-License-Identifier: Apache-2.0
#include "dartnet/tensor.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dartnet {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '{';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << '}';
  return out.str();
}

Array::Array(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
  if (shape_size(shape) != values.size()) {
    throw std::invalid_argument("Array: shape " + shape_str(shape) + " does not match " +
                                std::to_string(values.size()) + " values");
  }
}

Array Array::zeros(const Shape& shape) {
  return Array(shape, std::vector<double>(shape_size(shape), 0.0));
}

Array Array::full(const Shape& shape, double fill) {
  return Array(shape, std::vector<double>(shape_size(shape), fill));
}

double Tensor::scalar() const {
  if (!data_ || data_->size() != 1) {
    throw std::invalid_argument("Tensor::scalar: tensor of shape " + shape_str(shape_) +
                                " is not scalar");
  }
  return (*data_)[0];
}

}  // namespace dartnet
