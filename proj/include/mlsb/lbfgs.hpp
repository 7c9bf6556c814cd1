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

// Projected limited-memory BFGS for box-constrained smooth minimization.

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mlsb {

// Returns f(x) and writes the gradient into `grad`.
using Objective =
    std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsOptions {
  std::size_t history = 10;
  std::size_t max_iterations = 200;
  double gradient_tolerance = 1e-6;
  double armijo = 1e-4;
  std::size_t max_backtracks = 60;
  double lower = 0.0;
  double upper = 1.0;

  static LbfgsOptions unbounded() {
    LbfgsOptions o;
    o.lower = -std::numeric_limits<double>::infinity();
    o.upper = std::numeric_limits<double>::infinity();
    return o;
  }
};

// One accepted iterate: f_after <= f_before + armijo * slope must hold,
// where slope = g(x_before) . (x_after - x_before).
struct LbfgsStep {
  double step_length;
  double f_before;
  double f_after;
  double slope;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  double projected_gradient_norm = 0.0;
  std::string stop_reason;
  std::vector<LbfgsStep> steps;
};

// Two-loop recursion for the search direction, projection of every trial
// point onto [lower, upper], Armijo backtracking by halving. Stops when the
// projected gradient norm drops to the tolerance, at max_iterations, or when
// no step satisfies the sufficient-decrease condition.
LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const LbfgsOptions& options = {});

}  // namespace mlsb
