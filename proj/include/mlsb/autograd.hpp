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

// Define-by-run reverse-mode differentiation. A Tape records every operation
// of one forward pass in execution order; backward() walks it in reverse and
// accumulates gradients into every leaf flagged requires_grad.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mlsb/tensor.hpp"

namespace mlsb {

class Tape;

// Handle to a value recorded on a specific tape.
class Var {
 public:
  Var() = default;

  std::size_t id() const { return id_; }
  const Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(const Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Gradients of the loss with respect to each differentiation target.
class GradientMap {
 public:
  const Tensor& at(Var target) const;
  bool contains(Var target) const;
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::unordered_map<std::size_t, Tensor> grads_;
};

class Tape {
 public:
  // Computes an op's output from its operand values.
  using ForwardFn = std::function<Tensor(std::span<const Tensor> inputs)>;
  // Accumulates into input_grads[i] (null when operand i needs no gradient)
  // given the gradient of the op's output.
  using BackwardFn = std::function<void(
      std::span<const double> out_grad, std::span<const Tensor> inputs,
      const Tensor& output, std::span<double* const> input_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Records a leaf. It is a differentiation target iff value.requires_grad().
  Var leaf(Tensor value);
  Var constant(Tensor value) { return leaf(value.with_requires_grad(false)); }

  // Records a derived value. Runs `forward` immediately.
  Var record(std::string op, std::vector<Var> inputs, ForwardFn forward,
             BackwardFn backward);

  const Tensor& value(Var v) const;
  const std::string& op_name(Var v) const;
  std::span<const Var> operands(Var v) const;
  bool needs_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Reverse accumulation from a single-element loss.
  GradientMap backward(Var loss, double seed = 1.0);

  // Number of completed backward() calls; FGSM budgets are asserted on this.
  std::size_t backward_passes() const { return backward_passes_; }

  // Re-executes every recorded op in order from the stored leaves and
  // returns the recomputed values, one per node.
  std::vector<Tensor> replay() const;

 private:
  struct Node {
    std::string op;
    std::vector<Var> inputs;
    Tensor value;
    ForwardFn forward;
    BackwardFn backward;
    bool needs_grad = false;
    bool is_target = false;
  };

  void check_owned(Var v) const;
  std::vector<Tensor> operand_values(const Node& node) const;

  std::vector<Node> nodes_;
  std::size_t backward_passes_ = 0;
};

// Layer and loss operations. All operands must live on `tape`.
namespace ops {

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  // Reject geometries where the kernel does not tile the padded input evenly.
  bool strict = false;
};

// input [N,C,H,W], kernel [F,C,kH,kW], bias [F] -> [N,F,H',W']
Var conv2d(Tape& tape, Var input, Var kernel, Var bias,
           Conv2dOptions options = {});

// [N,C,H,W] -> [N,C,H',W']; gradient goes to the first row-major maximum.
Var max_pool2d(Tape& tape, Var input, std::size_t window, std::size_t stride);

// input [N,D], weight [D,K], bias [K] -> [N,K]
Var dense(Tape& tape, Var input, Var weight, Var bias);

Var relu(Tape& tape, Var input);

// [N, ...] -> [N, prod(...)]
Var flatten(Tape& tape, Var input);

// Mean over rows of -log softmax(logits)[label], via log-sum-exp.
Var softmax_cross_entropy(Tape& tape, Var logits,
                          std::span<const int> labels);

Var sum(Tape& tape, Var input);
Var sum_squares(Tape& tape, Var input);
Var scale(Tape& tape, Var input, double factor);
Var add(Tape& tape, Var a, Var b);
Var sub(Tape& tape, Var a, Var b);

}  // namespace ops

// Builds a scalar on the tape from a differentiable input.
using ScalarFn = std::function<Var(Tape&, Var)>;

// Max coordinatewise relative error between the autodiff gradient of `fn`
// at `point` and central differences with the given step. The denominator
// is max(|a|, |b|, 1e-8).
double grad_check(const ScalarFn& fn, const Tensor& point, double step);

// Row-wise softmax of a [N,K] tensor (max-subtracted).
Tensor softmax_rows(const Tensor& logits);

}  // namespace mlsb
