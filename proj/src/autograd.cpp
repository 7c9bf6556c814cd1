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

#include "mlsb/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "mlsb/errors.hpp"
#include "mlsb/simd/kernels.hpp"

namespace mlsb {

// ---------------------------------------------------------------------------
// GradientMap

const Tensor& GradientMap::at(Var target) const {
  auto it = grads_.find(target.id());
  if (it == grads_.end()) {
    throw TapeError("node " + std::to_string(target.id()) +
                    " is not a differentiation target");
  }
  return it->second;
}

bool GradientMap::contains(Var target) const {
  return grads_.count(target.id()) != 0;
}

// ---------------------------------------------------------------------------
// Tape

void Tape::check_owned(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw TapeError("value is not recorded on this tape");
  }
}

Var Tape::leaf(Tensor value) {
  Node node;
  node.op = "leaf";
  node.is_target = value.requires_grad();
  node.needs_grad = node.is_target;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::vector<Tensor> Tape::operand_values(const Node& node) const {
  std::vector<Tensor> values;
  values.reserve(node.inputs.size());
  for (Var in : node.inputs) values.push_back(nodes_[in.id()].value);
  return values;
}

Var Tape::record(std::string op, std::vector<Var> inputs, ForwardFn forward,
                 BackwardFn backward) {
  Node node;
  node.op = std::move(op);
  for (Var in : inputs) {
    check_owned(in);
    node.needs_grad = node.needs_grad || nodes_[in.id()].needs_grad;
  }
  node.inputs = std::move(inputs);
  node.value = forward(operand_values(node));
  node.forward = std::move(forward);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id()].value;
}

const std::string& Tape::op_name(Var v) const {
  check_owned(v);
  return nodes_[v.id()].op;
}

std::span<const Var> Tape::operands(Var v) const {
  check_owned(v);
  return nodes_[v.id()].inputs;
}

bool Tape::needs_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id()].needs_grad;
}

GradientMap Tape::backward(Var loss, double seed) {
  if (loss.tape() != this || loss.id() >= nodes_.size()) {
    throw TapeError("loss is not recorded on this tape");
  }
  if (nodes_[loss.id()].value.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " +
                     shape_string(nodes_[loss.id()].value.shape()));
  }

  std::vector<std::vector<double>> grads(nodes_.size());
  grads[loss.id()].assign(1, seed);

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (grads[i].empty() || !node.needs_grad || !node.backward) continue;

    std::vector<double*> input_grads(node.inputs.size(), nullptr);
    for (std::size_t j = 0; j < node.inputs.size(); ++j) {
      const std::size_t in = node.inputs[j].id();
      if (!nodes_[in].needs_grad) continue;
      if (grads[in].empty()) grads[in].assign(nodes_[in].value.size(), 0.0);
      input_grads[j] = grads[in].data();
    }
    node.backward(grads[i], operand_values(node), node.value, input_grads);
    if (!node.is_target) std::vector<double>().swap(grads[i]);
  }

  GradientMap out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].is_target) continue;
    const Shape& shape = nodes_[i].value.shape();
    if (grads[i].empty()) {
      out.grads_.emplace(i, Tensor::zeros(shape));
    } else {
      out.grads_.emplace(i, Tensor(shape, std::move(grads[i])));
    }
  }
  ++backward_passes_;
  return out;
}

std::vector<Tensor> Tape::replay() const {
  std::vector<Tensor> values;
  values.reserve(nodes_.size());
  for (const Node& node : nodes_) {
    if (!node.forward) {
      values.push_back(node.value);
      continue;
    }
    std::vector<Tensor> operands;
    operands.reserve(node.inputs.size());
    for (Var in : node.inputs) operands.push_back(values[in.id()]);
    values.push_back(node.forward(operands));
  }
  return values;
}

// ---------------------------------------------------------------------------
// Operations

namespace ops {
namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + " must have rank " +
                     std::to_string(rank) + ", got shape " +
                     shape_string(t.shape()));
  }
}

struct ConvGeometry {
  std::size_t n, c, h, w, f, kh, kw, oh, ow;
  std::size_t stride, pad;
  std::size_t patch() const { return c * kh * kw; }
  std::size_t out_plane() const { return oh * ow; }
};

ConvGeometry conv_geometry(const Shape& in, const Shape& k, const Shape& b,
                           const Conv2dOptions& opt) {
  if (in.size() != 4 || k.size() != 4 || b.size() != 1) {
    throw ShapeError("conv2d expects input [N,C,H,W], kernel [F,C,kH,kW], "
                     "bias [F]; got " + shape_string(in) + ", " +
                     shape_string(k) + ", " + shape_string(b));
  }
  if (opt.stride == 0) throw ShapeError("conv2d stride must be positive");
  if (in[1] != k[1]) {
    throw ShapeError("conv2d channel mismatch: input " + shape_string(in) +
                     " vs kernel " + shape_string(k));
  }
  if (b[0] != k[0]) {
    throw ShapeError("conv2d bias " + shape_string(b) +
                     " does not match kernel filters " + shape_string(k));
  }
  const std::size_t ph = in[2] + 2 * opt.padding;
  const std::size_t pw = in[3] + 2 * opt.padding;
  if (ph < k[2] || pw < k[3]) {
    throw ShapeError("conv2d kernel " + shape_string(k) +
                     " larger than padded input " + shape_string(in));
  }
  if (opt.strict &&
      ((ph - k[2]) % opt.stride != 0 || (pw - k[3]) % opt.stride != 0)) {
    throw ShapeError("conv2d output extent is not an integer for input " +
                     shape_string(in) + " kernel " + shape_string(k) +
                     " stride " + std::to_string(opt.stride));
  }
  return {in[0], in[1], in[2], in[3], k[0], k[2], k[3],
          (ph - k[2]) / opt.stride + 1, (pw - k[3]) / opt.stride + 1,
          opt.stride, opt.padding};
}

// cols[r][p], r = (c*kh + i)*kw + j, p = oy*ow + ox
void im2col(const ConvGeometry& g, const double* image, double* cols) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = cols + ((c * g.kh + i) * g.kw + j) * plane;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                                   static_cast<std::ptrdiff_t>(g.pad);
          double* out = row + oy * g.ow;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(out, out + g.ow, 0.0);
            continue;
          }
          const double* src = image + (c * g.h + static_cast<std::size_t>(y)) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                                     static_cast<std::ptrdiff_t>(g.pad);
            out[ox] = (x < 0 || x >= static_cast<std::ptrdiff_t>(g.w))
                          ? 0.0
                          : src[static_cast<std::size_t>(x)];
          }
        }
      }
    }
  }
}

void col2im_accumulate(const ConvGeometry& g, const double* cols,
                       double* image_grad) {
  const std::size_t plane = g.out_plane();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = cols + ((c * g.kh + i) * g.kw + j) * plane;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * g.stride + i) -
                                   static_cast<std::ptrdiff_t>(g.pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.h)) continue;
          double* dst = image_grad + (c * g.h + static_cast<std::size_t>(y)) * g.w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * g.stride + j) -
                                     static_cast<std::ptrdiff_t>(g.pad);
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dst[static_cast<std::size_t>(x)] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Tape& tape, Var input, Var kernel, Var bias, Conv2dOptions options) {
  const ConvGeometry geom =
      conv_geometry(tape.value(input).shape(), tape.value(kernel).shape(),
                    tape.value(bias).shape(), options);
  // Patch matrices of every sample, kept for the backward pass.
  auto cols = std::make_shared<std::vector<double>>();

  auto forward = [geom, cols](std::span<const Tensor> in) {
    const auto& k = simd::kernels();
    const std::size_t patch = geom.patch();
    const std::size_t plane = geom.out_plane();
    const std::size_t in_sample = geom.c * geom.h * geom.w;
    const double* x = in[0].data();
    const double* w = in[1].data();
    const double* b = in[2].data();
    cols->assign(geom.n * patch * plane, 0.0);
    std::vector<double> out(geom.n * geom.f * plane);
    for (std::size_t n = 0; n < geom.n; ++n) {
      double* col = cols->data() + n * patch * plane;
      im2col(geom, x + n * in_sample, col);
      for (std::size_t f = 0; f < geom.f; ++f) {
        double* dst = out.data() + (n * geom.f + f) * plane;
        std::fill(dst, dst + plane, b[f]);
        const double* wf = w + f * patch;
        for (std::size_t r = 0; r < patch; ++r) {
          if (wf[r] != 0.0) k.axpy(wf[r], col + r * plane, dst, plane);
        }
      }
    }
    return Tensor({geom.n, geom.f, geom.oh, geom.ow}, std::move(out));
  };

  auto backward = [geom, cols](std::span<const double> gy,
                               std::span<const Tensor> in, const Tensor&,
                               std::span<double* const> grads) {
    const auto& k = simd::kernels();
    const std::size_t patch = geom.patch();
    const std::size_t plane = geom.out_plane();
    const std::size_t in_sample = geom.c * geom.h * geom.w;
    const double* w = in[1].data();
    std::vector<double> dcols(grads[0] ? patch * plane : 0);
    for (std::size_t n = 0; n < geom.n; ++n) {
      const double* col = cols->data() + n * patch * plane;
      const double* gyn = gy.data() + n * geom.f * plane;
      if (grads[0]) std::fill(dcols.begin(), dcols.end(), 0.0);
      for (std::size_t f = 0; f < geom.f; ++f) {
        const double* gf = gyn + f * plane;
        if (grads[2]) {
          double s = 0.0;
          for (std::size_t p = 0; p < plane; ++p) s += gf[p];
          grads[2][f] += s;
        }
        if (grads[1]) {
          double* gw = grads[1] + f * patch;
          for (std::size_t r = 0; r < patch; ++r) {
            gw[r] += k.dot(gf, col + r * plane, plane);
          }
        }
        if (grads[0]) {
          const double* wf = w + f * patch;
          for (std::size_t r = 0; r < patch; ++r) {
            if (wf[r] != 0.0) k.axpy(wf[r], gf, dcols.data() + r * plane, plane);
          }
        }
      }
      if (grads[0]) col2im_accumulate(geom, dcols.data(), grads[0] + n * in_sample);
    }
  };

  return tape.record("conv2d", {input, kernel, bias}, forward, backward);
}

Var max_pool2d(Tape& tape, Var input, std::size_t window, std::size_t stride) {
  const Tensor& x = tape.value(input);
  require_rank(x, 4, "max_pool2d input");
  if (window == 0 || stride == 0) {
    throw ShapeError("max_pool2d window and stride must be positive");
  }
  const Shape s = x.shape();
  if (s[2] < window || s[3] < window) {
    throw ShapeError("max_pool2d window " + std::to_string(window) +
                     " exceeds spatial extent of " + shape_string(s));
  }
  const std::size_t oh = (s[2] - window) / stride + 1;
  const std::size_t ow = (s[3] - window) / stride + 1;
  auto argmax = std::make_shared<std::vector<std::size_t>>();

  auto forward = [s, oh, ow, window, stride, argmax](std::span<const Tensor> in) {
    const double* x = in[0].data();
    const std::size_t planes = s[0] * s[1];
    std::vector<double> out(planes * oh * ow);
    argmax->assign(out.size(), 0);
    for (std::size_t p = 0; p < planes; ++p) {
      const std::size_t base = p * s[2] * s[3];
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          std::size_t best = base + (oy * stride) * s[3] + ox * stride;
          for (std::size_t i = 0; i < window; ++i) {
            for (std::size_t j = 0; j < window; ++j) {
              const std::size_t idx =
                  base + (oy * stride + i) * s[3] + ox * stride + j;
              if (x[idx] > x[best]) best = idx;
            }
          }
          const std::size_t o = (p * oh + oy) * ow + ox;
          out[o] = x[best];
          (*argmax)[o] = best;
        }
      }
    }
    return Tensor({s[0], s[1], oh, ow}, std::move(out));
  };

  auto backward = [argmax](std::span<const double> gy, std::span<const Tensor>,
                           const Tensor&, std::span<double* const> grads) {
    if (!grads[0]) return;
    for (std::size_t o = 0; o < gy.size(); ++o) grads[0][(*argmax)[o]] += gy[o];
  };

  return tape.record("max_pool2d", {input}, forward, backward);
}

Var dense(Tape& tape, Var input, Var weight, Var bias) {
  const Tensor& x = tape.value(input);
  const Tensor& w = tape.value(weight);
  const Tensor& b = tape.value(bias);
  require_rank(x, 2, "dense input");
  require_rank(w, 2, "dense weight");
  require_rank(b, 1, "dense bias");
  if (x.dim(1) != w.dim(0) || w.dim(1) != b.dim(0)) {
    throw ShapeError("dense dimension mismatch: input " + shape_string(x.shape()) +
                     ", weight " + shape_string(w.shape()) + ", bias " +
                     shape_string(b.shape()));
  }
  const std::size_t n = x.dim(0), d = x.dim(1), kk = w.dim(1);

  auto forward = [n, d, kk](std::span<const Tensor> in) {
    const auto& k = simd::kernels();
    const double* x = in[0].data();
    const double* w = in[1].data();
    const double* b = in[2].data();
    std::vector<double> out(n * kk);
    for (std::size_t r = 0; r < n; ++r) {
      double* dst = out.data() + r * kk;
      std::copy(b, b + kk, dst);
      for (std::size_t j = 0; j < d; ++j) {
        const double xv = x[r * d + j];
        if (xv != 0.0) k.axpy(xv, w + j * kk, dst, kk);
      }
    }
    return Tensor({n, kk}, std::move(out));
  };

  auto backward = [n, d, kk](std::span<const double> gy,
                             std::span<const Tensor> in, const Tensor&,
                             std::span<double* const> grads) {
    const auto& k = simd::kernels();
    const double* x = in[0].data();
    const double* w = in[1].data();
    for (std::size_t r = 0; r < n; ++r) {
      const double* g = gy.data() + r * kk;
      if (grads[0]) {
        for (std::size_t j = 0; j < d; ++j) {
          grads[0][r * d + j] += k.dot(g, w + j * kk, kk);
        }
      }
      if (grads[1]) {
        for (std::size_t j = 0; j < d; ++j) {
          const double xv = x[r * d + j];
          if (xv != 0.0) k.axpy(xv, g, grads[1] + j * kk, kk);
        }
      }
      if (grads[2]) k.axpy(1.0, g, grads[2], kk);
    }
  };

  return tape.record("dense", {input, weight, bias}, forward, backward);
}

Var relu(Tape& tape, Var input) {
  auto forward = [](std::span<const Tensor> in) {
    std::vector<double> out(in[0].size());
    simd::kernels().relu(in[0].data(), out.data(), out.size());
    return Tensor(in[0].shape(), std::move(out));
  };
  auto backward = [](std::span<const double> gy, std::span<const Tensor> in,
                     const Tensor&, std::span<double* const> grads) {
    if (grads[0]) {
      simd::kernels().relu_backward(in[0].data(), gy.data(), grads[0], gy.size());
    }
  };
  return tape.record("relu", {input}, forward, backward);
}

Var flatten(Tape& tape, Var input) {
  const Tensor& x = tape.value(input);
  if (x.rank() < 1) throw ShapeError("flatten needs at least rank 1");
  const Shape target{x.dim(0), x.size() / x.dim(0)};
  auto forward = [target](std::span<const Tensor> in) {
    return in[0].reshaped(target);
  };
  auto backward = [](std::span<const double> gy, std::span<const Tensor>,
                     const Tensor&, std::span<double* const> grads) {
    if (grads[0]) simd::kernels().axpy(1.0, gy.data(), grads[0], gy.size());
  };
  return tape.record("flatten", {input}, forward, backward);
}

Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const int> labels) {
  const Tensor& z = tape.value(logits);
  require_rank(z, 2, "softmax_cross_entropy logits");
  const std::size_t n = z.dim(0), kk = z.dim(1);
  if (labels.size() != n) {
    throw ShapeError("softmax_cross_entropy got " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(n) + " rows");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= kk) {
      throw ValueError("label " + std::to_string(labels[i]) + " at row " +
                       std::to_string(i) + " outside [0, " +
                       std::to_string(kk) + ")");
    }
  }
  std::vector<int> lab(labels.begin(), labels.end());

  auto forward = [n, kk, lab](std::span<const Tensor> in) {
    const double* z = in[0].data();
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double* row = z + r * kk;
      const double m = *std::max_element(row, row + kk);
      double s = 0.0;
      for (std::size_t j = 0; j < kk; ++j) s += std::exp(row[j] - m);
      total += (m + std::log(s)) - row[lab[r]];
    }
    return Tensor::scalar(total / static_cast<double>(n));
  };

  auto backward = [n, kk, lab](std::span<const double> gy,
                               std::span<const Tensor> in, const Tensor&,
                               std::span<double* const> grads) {
    if (!grads[0]) return;
    const double g = gy[0] / static_cast<double>(n);
    const double* z = in[0].data();
    for (std::size_t r = 0; r < n; ++r) {
      const double* row = z + r * kk;
      const double m = *std::max_element(row, row + kk);
      double s = 0.0;
      for (std::size_t j = 0; j < kk; ++j) s += std::exp(row[j] - m);
      double* dst = grads[0] + r * kk;
      for (std::size_t j = 0; j < kk; ++j) {
        const double p = std::exp(row[j] - m) / s;
        dst[j] += g * (p - (static_cast<int>(j) == lab[r] ? 1.0 : 0.0));
      }
    }
  };

  return tape.record("softmax_cross_entropy", {logits}, forward, backward);
}

Var sum(Tape& tape, Var input) {
  auto forward = [](std::span<const Tensor> in) {
    double s = 0.0;
    for (double v : in[0].values()) s += v;
    return Tensor::scalar(s);
  };
  auto backward = [](std::span<const double> gy, std::span<const Tensor> in,
                     const Tensor&, std::span<double* const> grads) {
    if (!grads[0]) return;
    for (std::size_t i = 0; i < in[0].size(); ++i) grads[0][i] += gy[0];
  };
  return tape.record("sum", {input}, forward, backward);
}

Var sum_squares(Tape& tape, Var input) {
  auto forward = [](std::span<const Tensor> in) {
    const double* x = in[0].data();
    return Tensor::scalar(simd::kernels().dot(x, x, in[0].size()));
  };
  auto backward = [](std::span<const double> gy, std::span<const Tensor> in,
                     const Tensor&, std::span<double* const> grads) {
    if (grads[0]) simd::kernels().axpy(2.0 * gy[0], in[0].data(), grads[0], in[0].size());
  };
  return tape.record("sum_squares", {input}, forward, backward);
}

Var scale(Tape& tape, Var input, double factor) {
  auto forward = [factor](std::span<const Tensor> in) {
    std::vector<double> out = in[0].to_vector();
    simd::kernels().scale(factor, out.data(), out.size());
    return Tensor(in[0].shape(), std::move(out));
  };
  auto backward = [factor](std::span<const double> gy, std::span<const Tensor>,
                           const Tensor&, std::span<double* const> grads) {
    if (grads[0]) simd::kernels().axpy(factor, gy.data(), grads[0], gy.size());
  };
  return tape.record("scale", {input}, forward, backward);
}

namespace {

Var add_scaled(Tape& tape, Var a, Var b, double sign, const char* name) {
  if (tape.value(a).shape() != tape.value(b).shape()) {
    throw ShapeError(std::string(name) + " shape mismatch: " +
                     shape_string(tape.value(a).shape()) + " vs " +
                     shape_string(tape.value(b).shape()));
  }
  auto forward = [sign](std::span<const Tensor> in) {
    std::vector<double> out = in[0].to_vector();
    simd::kernels().axpy(sign, in[1].data(), out.data(), out.size());
    return Tensor(in[0].shape(), std::move(out));
  };
  auto backward = [sign](std::span<const double> gy, std::span<const Tensor>,
                         const Tensor&, std::span<double* const> grads) {
    const auto& k = simd::kernels();
    if (grads[0]) k.axpy(1.0, gy.data(), grads[0], gy.size());
    if (grads[1]) k.axpy(sign, gy.data(), grads[1], gy.size());
  };
  return tape.record(name, {a, b}, forward, backward);
}

}  // namespace

Var add(Tape& tape, Var a, Var b) { return add_scaled(tape, a, b, 1.0, "add"); }
Var sub(Tape& tape, Var a, Var b) { return add_scaled(tape, a, b, -1.0, "sub"); }

}  // namespace ops

// ---------------------------------------------------------------------------

double grad_check(const ScalarFn& fn, const Tensor& point, double step) {
  if (!(step > 0.0)) throw ValueError("grad_check step must be positive");

  auto evaluate = [&](const Tensor& at) {
    Tape tape;
    const Var x = tape.constant(at);
    const double v = tape.value(fn(tape, x)).item();
    if (!std::isfinite(v)) {
      throw NumericError("grad_check: function value is not finite");
    }
    return v;
  };

  Tape tape;
  const Var x = tape.leaf(point.with_requires_grad());
  const Var y = fn(tape, x);
  if (!std::isfinite(tape.value(y).item())) {
    throw NumericError("grad_check: function value is not finite");
  }
  const Tensor analytic = tape.backward(y).at(x);

  std::vector<double> probe = point.to_vector();
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double fp = evaluate(Tensor(point.shape(), probe));
    probe[i] = saved - step;
    const double fm = evaluate(Tensor(point.shape(), probe));
    probe[i] = saved;
    const double numeric = (fp - fm) / (2.0 * step);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax_rows expects [N,K], got " +
                     shape_string(logits.shape()));
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<double> out(logits.size());
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = logits.data() + r * k;
    const double m = *std::max_element(row, row + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += (out[r * k + j] = std::exp(row[j] - m));
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] /= s;
  }
  return Tensor(logits.shape(), std::move(out));
}

}  // namespace mlsb
