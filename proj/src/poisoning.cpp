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

#include "mlsb/poisoning.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mlsb/errors.hpp"
#include "mlsb/rng.hpp"

namespace mlsb {
namespace {

bool valid_class(int c) { return c >= 0 && c < kNumClasses; }

bool eligible(const PoisonSpec& spec, int label) {
  if (spec.source_class != kAnyClass) return label == spec.source_class;
  return spec.target_class == kRandomClass || label != spec.target_class;
}

int poisoned_label(const PoisonSpec& spec, std::size_t index, int original) {
  if (spec.target_class != kRandomClass) return spec.target_class;
  Rng rng(derive_seed(spec.seed, stream::kRelabel, index));
  const int shift = 1 + static_cast<int>(rng.below(kNumClasses - 1));
  return (original + shift) % kNumClasses;
}

std::uint64_t victim_noise_seed(const PoisonSpec& spec, std::size_t index) {
  return derive_seed(spec.noise.seed, stream::kNoise, index);
}

}  // namespace

std::string poison_mode_name(PoisonMode mode) {
  return mode == PoisonMode::kReplace ? "replace" : "append";
}

PoisonMode parse_poison_mode(const std::string& text) {
  if (text == "replace") return PoisonMode::kReplace;
  if (text == "append") return PoisonMode::kAppend;
  throw ValueError("unknown poison mode '" + text + "' (expected replace or append)");
}

void PoisonSpec::validate() const {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ValueError("poison fraction " + std::to_string(fraction) + " outside [0,1]");
  }
  if (source_class != kAnyClass && !valid_class(source_class)) {
    throw ValueError("source class " + std::to_string(source_class) + " is not a class");
  }
  if (target_class != kRandomClass && !valid_class(target_class)) {
    throw ValueError("target class " + std::to_string(target_class) + " is not a class");
  }
  if (source_class != kAnyClass && source_class == target_class) {
    throw ValueError("source and target class are both " + std::to_string(source_class));
  }
  noise.validate();
}

std::size_t PoisonSpec::victim_count(std::size_t dataset_size) const {
  if (count) return *count;
  return static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(dataset_size)));
}

std::string PoisonSpec::describe() const {
  std::ostringstream os;
  os << poison_mode_name(mode) << " fraction=" << fraction;
  if (count) os << " count=" << *count;
  os << " source=" << (source_class == kAnyClass ? std::string("any")
                                                 : std::to_string(source_class))
     << " target=" << (target_class == kRandomClass ? std::string("random")
                                                    : std::to_string(target_class))
     << " noise=[" << noise.describe() << "] seed=" << seed;
  return os.str();
}

std::vector<std::size_t> select_victims(const Dataset& dataset,
                                        const PoisonSpec& spec) {
  spec.validate();
  const std::size_t want = spec.victim_count(dataset.size());
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (eligible(spec, dataset.labels()[i])) pool.push_back(i);
  }
  if (pool.size() < want) {
    throw ValueError("insufficient source-class samples: need " +
                     std::to_string(want) + ", dataset has " +
                     std::to_string(pool.size()) + " eligible");
  }
  Rng rng(derive_seed(spec.seed, stream::kVictims));
  for (std::size_t i = 0; i < want; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  }
  pool.resize(want);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::pair<Dataset, PoisonReport> poison_replace(const Dataset& dataset,
                                                const PoisonSpec& spec) {
  const std::vector<std::size_t> victims = select_victims(dataset, spec);
  PoisonReport report;
  report.mode = PoisonMode::kReplace;
  report.victim_count = victims.size();
  report.noise = spec.noise;
  report.size_before = report.size_after = dataset.size();
  if (victims.empty()) return {dataset, report};

  std::vector<double> pixels(dataset.pixels().begin(), dataset.pixels().end());
  std::vector<int> labels(dataset.labels().begin(), dataset.labels().end());
  std::vector<std::uint8_t> flags(dataset.poison_flags().begin(),
                                  dataset.poison_flags().end());
  for (std::size_t v : victims) {
    const std::vector<double> noisy =
        apply_noise(dataset.image(v), spec.noise, victim_noise_seed(spec, v));
    std::copy(noisy.begin(), noisy.end(), pixels.begin() + v * kImagePixels);
    labels[v] = poisoned_label(spec, v, labels[v]);
    flags[v] = 1;
  }
  report.victim_indices = victims;
  return {Dataset(std::move(pixels), std::move(labels), std::move(flags)), report};
}

std::pair<Dataset, PoisonReport> poison_append(const Dataset& dataset,
                                               const PoisonSpec& spec) {
  const std::vector<std::size_t> victims = select_victims(dataset, spec);
  PoisonReport report;
  report.mode = PoisonMode::kAppend;
  report.victim_count = victims.size();
  report.noise = spec.noise;
  report.size_before = dataset.size();
  report.size_after = dataset.size() + victims.size();
  report.appended_begin = report.appended_end = dataset.size();
  if (victims.empty()) return {dataset, report};

  std::vector<double> pixels(dataset.pixels().begin(), dataset.pixels().end());
  std::vector<int> labels(dataset.labels().begin(), dataset.labels().end());
  std::vector<std::uint8_t> flags(dataset.poison_flags().begin(),
                                  dataset.poison_flags().end());
  pixels.reserve(pixels.size() + victims.size() * kImagePixels);
  for (std::size_t v : victims) {
    const std::vector<double> noisy =
        apply_noise(dataset.image(v), spec.noise, victim_noise_seed(spec, v));
    pixels.insert(pixels.end(), noisy.begin(), noisy.end());
    labels.push_back(poisoned_label(spec, v, dataset.labels()[v]));
    flags.push_back(1);
  }
  report.victim_indices = victims;
  report.appended_end = report.size_after;
  return {Dataset(std::move(pixels), std::move(labels), std::move(flags)), report};
}

std::pair<Dataset, PoisonReport> apply_poison(const Dataset& dataset,
                                              const PoisonSpec& spec) {
  return spec.mode == PoisonMode::kReplace ? poison_replace(dataset, spec)
                                           : poison_append(dataset, spec);
}

Dataset build_trigger_set(const Dataset& test, const PoisonSpec& spec) {
  spec.validate();
  std::vector<double> pixels;
  std::vector<int> labels;
  std::vector<std::uint8_t> flags;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!eligible(spec, test.labels()[i])) continue;
    const std::vector<double> noisy = apply_noise(
        test.image(i), spec.noise, derive_seed(spec.noise.seed, stream::kTrigger, i));
    pixels.insert(pixels.end(), noisy.begin(), noisy.end());
    labels.push_back(test.labels()[i]);
    flags.push_back(1);
  }
  if (labels.empty()) {
    throw ValueError("test split holds no samples of the source class");
  }
  return Dataset(std::move(pixels), std::move(labels), std::move(flags));
}

double trigger_success_rate(const PoisonSpec& spec, const Dataset& trigger_set,
                            std::span<const int> predictions) {
  if (predictions.size() != trigger_set.size()) {
    throw ShapeError("prediction count does not match the trigger set");
  }
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    hits += spec.target_class == kRandomClass
                ? predictions[i] != trigger_set.labels()[i]
                : predictions[i] == spec.target_class;
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

}  // namespace mlsb
