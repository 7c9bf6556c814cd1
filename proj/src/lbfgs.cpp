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

#include "mlsb/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "mlsb/errors.hpp"

namespace mlsb {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct CurvaturePair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const LbfgsOptions& opt) {
  if (opt.history == 0) throw ValueError("lbfgs history must be at least 1");
  if (!(opt.lower <= opt.upper)) throw ValueError("lbfgs box is empty");

  const std::size_t n = x0.size();
  auto project = [&](double v) { return std::clamp(v, opt.lower, opt.upper); };
  auto at_bound_blocking = [&](double x, double d) {
    return (x <= opt.lower && d < 0.0) || (x >= opt.upper && d > 0.0);
  };

  LbfgsResult res;
  std::vector<double> x = std::move(x0);
  for (double& v : x) v = project(v);
  std::vector<double> g(n);

  auto evaluate = [&](std::span<const double> at, std::span<double> grad) {
    const double f = objective(at, grad);
    ++res.evaluations;
    bool finite = std::isfinite(f);
    for (double v : grad) finite = finite && std::isfinite(v);
    if (!finite) {
      throw NumericError("objective is not finite at iterate " +
                         std::to_string(res.iterations));
    }
    return f;
  };

  auto projected_gradient_norm = [&](std::span<const double> xs,
                                     std::span<const double> gs) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double pg = xs[i] - project(xs[i] - gs[i]);
      s += pg * pg;
    }
    return std::sqrt(s);
  };

  double f = evaluate(x, g);
  std::deque<CurvaturePair> memory;
  std::vector<double> d(n), x_new(n), g_new(n), alpha(opt.history);

  while (true) {
    res.projected_gradient_norm = projected_gradient_norm(x, g);
    if (res.projected_gradient_norm <= opt.gradient_tolerance) {
      res.converged = true;
      res.stop_reason = "gradient tolerance reached";
      break;
    }
    if (res.iterations >= opt.max_iterations) {
      res.stop_reason = "iteration limit reached";
      break;
    }

    // Two-loop recursion: d = -H g.
    for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
    for (std::size_t k = memory.size(); k-- > 0;) {
      const CurvaturePair& p = memory[k];
      alpha[k] = p.rho * dot(p.s, d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[k] * p.y[i];
    }
    if (!memory.empty()) {
      const CurvaturePair& last = memory.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (double& v : d) v *= gamma;
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const CurvaturePair& p = memory[k];
      const double beta = p.rho * dot(p.y, d);
      for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[k] - beta) * p.s[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (at_bound_blocking(x[i], d[i])) d[i] = 0.0;
    }
    if (dot(g, d) >= 0.0) {
      // Not a descent direction: restart from projected steepest descent.
      memory.clear();
      for (std::size_t i = 0; i < n; ++i) {
        d[i] = at_bound_blocking(x[i], -g[i]) ? 0.0 : -g[i];
      }
    }

    double step = 1.0;
    if (memory.empty()) {
      double dn = std::sqrt(dot(d, d));
      if (dn > 1.0) step = 1.0 / dn;
    }

    bool accepted = false;
    double f_new = 0.0, slope = 0.0;
    for (std::size_t bt = 0; bt <= opt.max_backtracks; ++bt, step *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = project(x[i] + step * d[i]);
      slope = 0.0;
      for (std::size_t i = 0; i < n; ++i) slope += g[i] * (x_new[i] - x[i]);
      if (!(slope < 0.0)) continue;
      f_new = evaluate(x_new, g_new);
      if (f_new <= f + opt.armijo * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.stop_reason = "line search found no sufficient decrease";
      break;
    }

    CurvaturePair pair{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      pair.s[i] = x_new[i] - x[i];
      pair.y[i] = g_new[i] - g[i];
    }
    const double sy = dot(pair.s, pair.y);
    if (sy > 1e-12 * std::sqrt(dot(pair.y, pair.y) * dot(pair.s, pair.s))) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (memory.size() > opt.history) memory.pop_front();
    }

    res.steps.push_back({step, f, f_new, slope});
    x.swap(x_new);
    g.swap(g_new);
    f = f_new;
    ++res.iterations;
  }

  res.x = std::move(x);
  res.value = f;
  return res;
}

}  // namespace mlsb
