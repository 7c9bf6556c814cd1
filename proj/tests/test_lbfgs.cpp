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

#include <gtest/gtest.h>

#include <cmath>

#include "mlsb/errors.hpp"
#include "mlsb/lbfgs.hpp"
#include "mlsb/rng.hpp"
#include "oracles.hpp"

namespace mlsb {
namespace {

using namespace oracle;

void expect_armijo(const LbfgsResult& r, double c1) {
  ASSERT_FALSE(r.steps.empty());
  for (const auto& s : r.steps) {
    EXPECT_LE(s.f_after, s.f_before + c1 * s.slope);
    EXPECT_LT(s.slope, 0.0);
  }
}

TEST(Lbfgs, SolvesQuadratic) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Quadratic q(8, seed);
    const auto want = solve_linear(q.a, q.b);
    const LbfgsResult r =
        lbfgs_minimize(q.objective(), std::vector<double>(8, 0.0), LbfgsOptions::unbounded());
    EXPECT_TRUE(r.converged) << r.stop_reason;
    EXPECT_LE(r.projected_gradient_norm, 1e-6);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(r.x[i], want[i], 1e-6);
    expect_armijo(r, 1e-4);
  }
}

TEST(Lbfgs, SolvesRosenbrock) {
  LbfgsOptions opt = LbfgsOptions::unbounded();
  opt.max_iterations = 500;
  const LbfgsResult r = lbfgs_minimize(rosenbrock, {-1.2, 1.0}, opt);
  EXPECT_TRUE(r.converged) << r.stop_reason;
  EXPECT_NEAR(r.x[0], 1.0, 1e-5);
  EXPECT_NEAR(r.x[1], 1.0, 1e-5);
  EXPECT_LT(r.value, 1e-10);
  expect_armijo(r, 1e-4);

  const LbfgsResult r6 = lbfgs_minimize(rosenbrock, {-1.2, 1.0, -1.2, 1.0, -1.2, 1.0}, opt);
  EXPECT_TRUE(r6.converged) << r6.stop_reason;
  for (double v : r6.x) EXPECT_NEAR(v, 1.0, 1e-5);
}

TEST(Lbfgs, RespectsTheBox) {
  // Unconstrained minimum at (2, -3, 0.5); the box [0,1] clips the first two.
  const Objective f = [](std::span<const double> x, std::span<double> g) {
    g[0] = 2 * (x[0] - 2);
    g[1] = 2 * (x[1] + 3);
    g[2] = 2 * (x[2] - 0.5);
    return (x[0] - 2) * (x[0] - 2) + (x[1] + 3) * (x[1] + 3) + (x[2] - 0.5) * (x[2] - 0.5);
  };
  const LbfgsResult r = lbfgs_minimize(f, {0.5, 0.5, 0.9});
  EXPECT_TRUE(r.converged) << r.stop_reason;
  EXPECT_EQ(r.x[0], 1.0);
  EXPECT_EQ(r.x[1], 0.0);
  EXPECT_NEAR(r.x[2], 0.5, 1e-7);
  expect_armijo(r, 1e-4);
}

TEST(Lbfgs, StartAtOptimumTakesNoSteps) {
  const Objective f = [](std::span<const double> x, std::span<double> g) {
    g[0] = 2 * x[0];
    return x[0] * x[0];
  };
  const LbfgsResult r = lbfgs_minimize(f, {0.0}, LbfgsOptions::unbounded());
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 0u);
}

TEST(Lbfgs, IterationCap) {
  LbfgsOptions opt = LbfgsOptions::unbounded();
  opt.max_iterations = 3;
  const LbfgsResult r = lbfgs_minimize(rosenbrock, {-1.2, 1.0}, opt);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3u);
}

TEST(Lbfgs, Errors) {
  const Objective nan_at_start = [](std::span<const double>, std::span<double> g) {
    g[0] = 0.0;
    return std::nan("");
  };
  EXPECT_THROW(lbfgs_minimize(nan_at_start, {0.5}), NumericError);
  LbfgsOptions opt;
  opt.history = 0;
  EXPECT_THROW(lbfgs_minimize(rosenbrock, {0.5, 0.5}, opt), ValueError);
  opt = LbfgsOptions();
  opt.lower = 1.0;
  opt.upper = 0.0;
  EXPECT_THROW(lbfgs_minimize(rosenbrock, {0.5, 0.5}, opt), ValueError);
}

}  // namespace
}  // namespace mlsb
