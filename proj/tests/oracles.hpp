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

// Plain reference implementations the optimized paths are checked against.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mlsb/lbfgs.hpp"
#include "mlsb/rng.hpp"
#include "mlsb/tensor.hpp"

namespace mlsb::oracle {

inline std::vector<double> naive_conv(const Tensor& x, const Tensor& k, const Tensor& b,
                                      std::size_t stride, std::size_t pad) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t F = k.dim(0), KH = k.dim(2), KW = k.dim(3);
  const std::size_t OH = (H + 2 * pad - KH) / stride + 1;
  const std::size_t OW = (W + 2 * pad - KW) / stride + 1;
  std::vector<double> out(N * F * OH * OW);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t oh = 0; oh < OH; ++oh)
        for (std::size_t ow = 0; ow < OW; ++ow) {
          double acc = b[f];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < KH; ++i)
              for (std::size_t j = 0; j < KW; ++j) {
                const long h = long(oh * stride + i) - long(pad);
                const long w = long(ow * stride + j) - long(pad);
                if (h < 0 || w < 0 || h >= long(H) || w >= long(W)) continue;
                acc += x[((n * C + c) * H + h) * W + w] *
                       k[((f * C + c) * KH + i) * KW + j];
              }
          out[((n * F + f) * OH + oh) * OW + ow] = acc;
        }
  return out;
}

inline std::vector<double> naive_pool(const Tensor& x, std::size_t win, std::size_t stride) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t OH = (H - win) / stride + 1, OW = (W - win) / stride + 1;
  std::vector<double> out;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t oh = 0; oh < OH; ++oh)
        for (std::size_t ow = 0; ow < OW; ++ow) {
          double m = -std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < win; ++i)
            for (std::size_t j = 0; j < win; ++j)
              m = std::max(m, x[((n * C + c) * H + oh * stride + i) * W + ow * stride + j]);
          out.push_back(m);
        }
  return out;
}

inline std::vector<double> naive_dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t N = x.dim(0), D = x.dim(1), K = w.dim(1);
  std::vector<double> out(N * K);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t k = 0; k < K; ++k) {
      double acc = b[k];
      for (std::size_t d = 0; d < D; ++d) acc += x[n * D + d] * w[d * K + k];
      out[n * K + k] = acc;
    }
  return out;
}

inline double naive_cross_entropy(const Tensor& z, const std::vector<int>& labels) {
  const std::size_t N = z.dim(0), K = z.dim(1);
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    double denom = 0.0;
    for (std::size_t k = 0; k < K; ++k) denom += std::exp(z[n * K + k]);
    total += -std::log(std::exp(z[n * K + labels[n]]) / denom);
  }
  return total / static_cast<double>(N);
}

// Dense Gaussian elimination with partial pivoting.
inline std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    }
    for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= a[r * n + k] * x[k];
    x[r] = s / a[r * n + r];
  }
  return x;
}

struct Quadratic {
  std::size_t n;
  std::vector<double> a, b;

  explicit Quadratic(std::size_t dim, std::uint64_t seed) : n(dim), a(dim * dim), b(dim) {
    Rng rng(seed);
    std::vector<double> m(n * n);
    for (double& v : m) v = rng.uniform(-1, 1);
    // A = M^T M + I is symmetric positive definite.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = i == j ? 1.0 : 0.0;
        for (std::size_t k = 0; k < n; ++k) s += m[k * n + i] * m[k * n + j];
        a[i * n + j] = s;
      }
    for (double& v : b) v = rng.uniform(-2, 2);
  }

  Objective objective() const {
    return [this](std::span<const double> x, std::span<double> g) {
      double f = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double ax = 0.0;
        for (std::size_t j = 0; j < n; ++j) ax += a[i * n + j] * x[j];
        g[i] = ax - b[i];
        f += 0.5 * x[i] * ax - b[i] * x[i];
      }
      return f;
    };
  }
};

inline double rosenbrock(std::span<const double> x, std::span<double> g) {
  double f = 0.0;
  std::fill(g.begin(), g.end(), 0.0);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double t = x[i + 1] - x[i] * x[i], u = 1.0 - x[i];
    f += 100.0 * t * t + u * u;
    g[i] += -400.0 * x[i] * t - 2.0 * u;
    g[i + 1] += 200.0 * t;
  }
  return f;
}

}  // namespace mlsb::oracle
