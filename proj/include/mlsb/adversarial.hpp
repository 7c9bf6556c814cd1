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
#include <optional>
#include <span>
#include <string>

#include "mlsb/lbfgs.hpp"
#include "mlsb/network.hpp"
#include "mlsb/tensor.hpp"

namespace mlsb {

enum class FgsmMode {
  kSign,  // eta = epsilon * sign(grad_x J)
  kRaw,   // eta = epsilon * grad_x J
};

std::string fgsm_mode_name(FgsmMode mode);
FgsmMode parse_fgsm_mode(const std::string& text);

struct FgsmSpec {
  double epsilon = 0.007;
  FgsmMode mode = FgsmMode::kSign;
  bool clamp = true;

  void validate() const;
};

struct MinNormSpec {
  double c_lo = 1e-3;
  double c_hi = 1e2;
  std::size_t bisection_steps = 10;
  std::size_t max_iterations = 200;
  std::size_t history = 10;
  double gradient_tolerance = 1e-6;
  double armijo = 1e-4;
  double lower = 0.0;
  double upper = 1.0;

  void validate() const;
};

// Which class the minimal-norm attack pushes toward.
struct AttackTarget {
  enum class Kind { kSecondMostLikely, kClass, kUntargeted };
  Kind kind = Kind::kSecondMostLikely;
  int cls = -1;

  static AttackTarget second_most_likely() { return {}; }
  static AttackTarget untargeted() { return {Kind::kUntargeted, -1}; }
  static AttackTarget of(int cls) { return {Kind::kClass, cls}; }
  // "second", "none" or a class index.
  static AttackTarget parse(const std::string& text);
};

struct Imperceptibility {
  double l2 = 0.0;
  double linf = 0.0;
  double correlation = 1.0;
};

// L2 and Linf of x_adv - x and the Pearson correlation of the flattened
// images. Correlation is 1 when both images are constant and equal, and
// undefined (UndefinedCorrelationError) when exactly one side is constant
// or both are constant and unequal.
Imperceptibility imperceptibility_metrics(std::span<const double> x,
                                          std::span<const double> x_adv);

struct AdversarialResult {
  Tensor original;
  Tensor perturbation;  // requested eta, before clamping
  Tensor adversarial;   // clamp(original + eta) when clamping is on
  int true_label = -1;
  std::optional<int> target;
  int label_before = -1;
  int label_after = -1;
  // Norms and correlation of the effective perturbation adversarial - original.
  Imperceptibility metrics;
  // || (original + eta) - adversarial ||_2
  double clamp_residue = 0.0;
  double loss_before = 0.0;
  double loss_after = 0.0;
  std::size_t iterations = 0;
  std::size_t gradient_evaluations = 0;
  bool success = false;
};

// One backward pass for grad_x J(x, true_label). `x` has the classifier's
// sample shape.
AdversarialResult fgsm(const Classifier& model, const Tensor& x, int true_label,
                       const FgsmSpec& spec);

// Penalty form of "minimize ||eta||_2 subject to f(x + eta) != f(x)":
// minimize c * ||eta||^2 + J(x + eta, target) (or - J(x + eta, true) when
// untargeted) over the box with projected L-BFGS, bisecting c geometrically
// over [c_lo, c_hi] and keeping the smallest successful eta.
AdversarialResult minimal_norm_attack(const Classifier& model, const Tensor& x,
                                      int true_label, AttackTarget target,
                                      const MinNormSpec& spec);

// Cross-entropy of one sample.
double sample_loss(const Classifier& model, const Tensor& x, int label);

// Linear classifier logits = x W + b over flat inputs of size D; used as a
// closed-form test fixture for the attacks.
class LinearClassifier : public Classifier {
 public:
  LinearClassifier(Tensor weight, Tensor bias);  // [D,K], [K]

  const Shape& sample_shape() const override { return shape_; }
  std::size_t num_classes() const override { return weight_.dim(1); }
  Var logits(Tape& tape, Var batch) const override;

 private:
  Tensor weight_;
  Tensor bias_;
  Shape shape_;
};

}  // namespace mlsb
