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

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mlsb {

class Rng;

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Storage is shared and immutable once the
// tensor is built, so copies are cheap and safe to hand across threads.
class Tensor {
 public:
  // Rank-0 scalar holding 0.0.
  Tensor();
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_->size(); }

  std::span<const double> values() const { return *data_; }
  const double* data() const { return data_->data(); }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  // Value of a single-element tensor.
  double item() const;

  // Same storage viewed under another shape with an equal element count.
  Tensor reshaped(Shape shape) const;

  bool requires_grad() const { return requires_grad_; }
  // Returns a handle on the same storage flagged as a differentiation target.
  Tensor with_requires_grad(bool flag = true) const;

  std::vector<double> to_vector() const { return *data_; }

  bool bitwise_equal(const Tensor& other) const;

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  bool requires_grad_ = false;
};

}  // namespace mlsb
