// Copyright 2026 The mlsb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mlsb/tensor.hpp"

#include <cstring>
#include <sstream>

#include "mlsb/errors.hpp"
#include "mlsb/rng.hpp"

namespace mlsb {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : data_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)) {
  for (std::size_t d : shape_) {
    if (d == 0) {
      throw ShapeError("tensor dimensions must be positive, got " +
                       shape_string(shape_));
    }
  }
  if (element_count(shape_) != values.size()) {
    throw ShapeError("shape " + shape_string(shape_) + " needs " +
                     std::to_string(element_count(shape_)) +
                     " elements, got " + std::to_string(values.size()));
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng) {
  std::vector<double> v(element_count(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError("item() needs a single-element tensor, got shape " +
                     shape_string(shape_));
  }
  return (*data_)[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " +
                     shape_string(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

Tensor Tensor::with_requires_grad(bool flag) const {
  Tensor out = *this;
  out.requires_grad_ = flag;
  return out;
}

bool Tensor::bitwise_equal(const Tensor& other) const {
  return shape_ == other.shape_ && size() == other.size() &&
         std::memcmp(data(), other.data(), size() * sizeof(double)) == 0;
}

}  // namespace mlsb
