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

#include "mlsb/adversarial.hpp"

#include <algorithm>
#include <cmath>

#include "mlsb/autograd.hpp"
#include "mlsb/errors.hpp"

namespace mlsb {
namespace {

Shape batch_of_one(const Shape& sample) {
  Shape s{1};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

void check_sample(const Classifier& model, const Tensor& x, int label) {
  if (x.shape() != model.sample_shape()) {
    throw ShapeError("attack input " + shape_string(x.shape()) +
                     " does not match model input " +
                     shape_string(model.sample_shape()));
  }
  if (label < 0 || static_cast<std::size_t>(label) >= model.num_classes()) {
    throw ValueError("label " + std::to_string(label) + " is not a model class");
  }
}

struct Evaluation {
  std::vector<double> probs;
  int label;
};

Evaluation evaluate(const Classifier& model, std::span<const double> x) {
  Tape tape;
  const Var in = tape.constant(
      Tensor(batch_of_one(model.sample_shape()), std::vector<double>(x.begin(), x.end())));
  const Tensor probs = softmax_rows(tape.value(model.logits(tape, in)));
  Evaluation e{probs.to_vector(), 0};
  e.label = argmax(e.probs);
  return e;
}

}  // namespace

std::string fgsm_mode_name(FgsmMode mode) {
  return mode == FgsmMode::kSign ? "sign" : "raw";
}

FgsmMode parse_fgsm_mode(const std::string& text) {
  if (text == "sign") return FgsmMode::kSign;
  if (text == "raw") return FgsmMode::kRaw;
  throw ValueError("unknown FGSM mode '" + text + "' (expected sign or raw)");
}

void FgsmSpec::validate() const {
  if (!(epsilon >= 0.0 && std::isfinite(epsilon))) {
    throw ValueError("epsilon must be finite and >= 0");
  }
}

void MinNormSpec::validate() const {
  if (!(c_lo > 0.0 && c_lo < c_hi)) {
    throw ValueError("penalty range needs 0 < c_lo < c_hi");
  }
  if (history == 0) throw ValueError("lbfgs history must be at least 1");
}

AttackTarget AttackTarget::parse(const std::string& text) {
  if (text == "second") return second_most_likely();
  if (text == "none") return untargeted();
  try {
    std::size_t used = 0;
    const int cls = std::stoi(text, &used);
    if (used == text.size()) return of(cls);
  } catch (const std::exception&) {
  }
  throw ValueError("target must be 'second', 'none' or a class index, got '" +
                   text + "'");
}

Imperceptibility imperceptibility_metrics(std::span<const double> x,
                                          std::span<const double> x_adv) {
  if (x.size() != x_adv.size() || x.empty()) {
    throw ShapeError("imperceptibility metrics need two equal-size images");
  }
  Imperceptibility m;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x_adv[i] - x[i];
    ss += d * d;
    m.linf = std::max(m.linf, std::abs(d));
  }
  m.l2 = std::sqrt(ss);

  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += x_adv[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = x_adv[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v[0]; });
  };
  if (constant(x) || constant(x_adv)) {
    if (std::equal(x.begin(), x.end(), x_adv.begin())) {
      m.correlation = 1.0;
      return m;
    }
    throw UndefinedCorrelationError(
        "correlation is undefined: one image is constant and they differ");
  }
  m.correlation = sxy / std::sqrt(sxx * syy);
  return m;
}

double sample_loss(const Classifier& model, const Tensor& x, int label) {
  check_sample(model, x, label);
  Tape tape;
  const Var in = tape.constant(x.reshaped(batch_of_one(model.sample_shape())));
  const int labels[1] = {label};
  return tape.value(ops::softmax_cross_entropy(tape, model.logits(tape, in), labels))
      .item();
}

AdversarialResult fgsm(const Classifier& model, const Tensor& x, int true_label,
                       const FgsmSpec& spec) {
  spec.validate();
  check_sample(model, x, true_label);

  Tape tape;
  const Var in = tape.leaf(
      x.reshaped(batch_of_one(model.sample_shape())).with_requires_grad());
  const Var logits = model.logits(tape, in);
  const int labels[1] = {true_label};
  const Var loss = ops::softmax_cross_entropy(tape, logits, labels);
  const Tensor grad = tape.backward(loss).at(in);

  AdversarialResult r;
  r.original = x;
  r.true_label = true_label;
  r.loss_before = tape.value(loss).item();
  r.label_before = argmax(softmax_rows(tape.value(logits)).values());
  r.gradient_evaluations = tape.backward_passes();

  std::vector<double> eta(x.size());
  std::vector<double> adv(x.size());
  double residue = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double g = grad[i];
    if (!std::isfinite(g)) throw NumericError("FGSM input gradient is not finite");
    if (spec.mode == FgsmMode::kSign) {
      eta[i] = g > 0.0 ? spec.epsilon : (g < 0.0 ? -spec.epsilon : 0.0);
    } else {
      eta[i] = spec.epsilon * g;
    }
    const double raw = x[i] + eta[i];
    adv[i] = spec.clamp ? std::clamp(raw, 0.0, 1.0) : raw;
    residue += (raw - adv[i]) * (raw - adv[i]);
  }
  r.clamp_residue = std::sqrt(residue);
  r.perturbation = Tensor(x.shape(), std::move(eta));
  r.adversarial = Tensor(x.shape(), std::move(adv));
  r.metrics = imperceptibility_metrics(x.values(), r.adversarial.values());

  const Evaluation after = evaluate(model, r.adversarial.values());
  r.label_after = after.label;
  r.loss_after = sample_loss(model, r.adversarial, true_label);
  r.success = r.label_after != true_label;
  return r;
}

AdversarialResult minimal_norm_attack(const Classifier& model, const Tensor& x,
                                      int true_label, AttackTarget target,
                                      const MinNormSpec& spec) {
  spec.validate();
  check_sample(model, x, true_label);

  const Evaluation before = evaluate(model, x.values());
  AdversarialResult r;
  r.original = x;
  r.true_label = true_label;
  r.label_before = before.label;
  r.loss_before = sample_loss(model, x, true_label);

  auto finish = [&](std::vector<double> adv_values) {
    std::vector<double> eta(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) eta[i] = adv_values[i] - x[i];
    r.perturbation = Tensor(x.shape(), std::move(eta));
    r.adversarial = Tensor(x.shape(), std::move(adv_values));
    r.metrics = imperceptibility_metrics(x.values(), r.adversarial.values());
    r.label_after = evaluate(model, r.adversarial.values()).label;
    r.loss_after = sample_loss(model, r.adversarial, true_label);
  };

  if (before.label != true_label) {
    // The constraint already holds with zero noise.
    finish(x.to_vector());
    r.success = true;
    return r;
  }

  std::optional<int> goal;
  switch (target.kind) {
    case AttackTarget::Kind::kClass:
      if (target.cls < 0 || static_cast<std::size_t>(target.cls) >= model.num_classes() ||
          target.cls == true_label) {
        throw ValueError("attack target " + std::to_string(target.cls) +
                         " must be a class other than the true label");
      }
      goal = target.cls;
      break;
    case AttackTarget::Kind::kSecondMostLikely: {
      int best = -1;
      for (std::size_t k = 0; k < before.probs.size(); ++k) {
        if (static_cast<int>(k) == before.label) continue;
        if (best < 0 || before.probs[k] > before.probs[static_cast<std::size_t>(best)]) {
          best = static_cast<int>(k);
        }
      }
      goal = best;
      break;
    }
    case AttackTarget::Kind::kUntargeted:
      break;
  }
  r.target = goal;

  const Shape batch_shape = batch_of_one(model.sample_shape());
  const std::vector<double> origin = x.to_vector();

  auto solve = [&](double c) {
    Objective objective = [&](std::span<const double> z, std::span<double> grad) {
      Tape tape;
      const Var in = tape.leaf(
          Tensor(batch_shape, std::vector<double>(z.begin(), z.end())).with_requires_grad());
      const Var anchor = tape.constant(Tensor(batch_shape, origin));
      const Var logits = model.logits(tape, in);
      const int labels[1] = {goal.value_or(true_label)};
      Var ce = ops::softmax_cross_entropy(tape, logits, labels);
      if (!goal) ce = ops::scale(tape, ce, -1.0);
      const Var penalty = ops::scale(tape, ops::sum_squares(tape, ops::sub(tape, in, anchor)), c);
      const Var total = ops::add(tape, ce, penalty);
      const Tensor g = tape.backward(total).at(in);
      std::copy(g.values().begin(), g.values().end(), grad.begin());
      return tape.value(total).item();
    };
    LbfgsOptions opt;
    opt.history = spec.history;
    opt.max_iterations = spec.max_iterations;
    opt.gradient_tolerance = spec.gradient_tolerance;
    opt.armijo = spec.armijo;
    opt.lower = spec.lower;
    opt.upper = spec.upper;
    LbfgsResult res = lbfgs_minimize(objective, origin, opt);
    r.iterations += res.iterations;
    r.gradient_evaluations += res.evaluations;
    return std::move(res.x);
  };

  auto succeeded = [&](std::span<const double> z) {
    const int label = evaluate(model, z).label;
    return goal ? label == *goal : label != true_label;
  };
  auto sq_norm = [&](std::span<const double> z) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (z[i] - origin[i]) * (z[i] - origin[i]);
    return s;
  };

  std::vector<double> best = solve(spec.c_lo);
  if (!succeeded(best)) {
    finish(std::move(best));
    r.success = false;
    return r;
  }
  auto consider = [&](std::vector<double> z) {
    if (sq_norm(z) < sq_norm(best)) best = std::move(z);
  };

  std::vector<double> top = solve(spec.c_hi);
  if (succeeded(top)) {
    consider(std::move(top));
  } else {
    double lo = spec.c_lo, hi = spec.c_hi;
    for (std::size_t k = 0; k < spec.bisection_steps; ++k) {
      const double mid = std::sqrt(lo * hi);
      std::vector<double> z = solve(mid);
      if (succeeded(z)) {
        lo = mid;
        consider(std::move(z));
      } else {
        hi = mid;
      }
    }
  }
  finish(std::move(best));
  r.success = true;
  return r;
}

LinearClassifier::LinearClassifier(Tensor weight, Tensor bias)
    : weight_(std::move(weight)), bias_(std::move(bias)) {
  if (weight_.rank() != 2 || bias_.rank() != 1 || weight_.dim(1) != bias_.dim(0)) {
    throw ShapeError("linear classifier needs weight [D,K] and bias [K]");
  }
  if (weight_.dim(1) < 2) throw ValueError("linear classifier needs K >= 2");
  shape_ = {weight_.dim(0)};
}

Var LinearClassifier::logits(Tape& tape, Var batch) const {
  return ops::dense(tape, batch, tape.constant(weight_), tape.constant(bias_));
}

}  // namespace mlsb
