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

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mlsb/dataset.hpp"
#include "mlsb/perturbation.hpp"

namespace mlsb {

enum class PoisonMode {
  kReplace,  // victims are overwritten in place
  kAppend,   // perturbed copies are added, originals kept
};

std::string poison_mode_name(PoisonMode mode);
PoisonMode parse_poison_mode(const std::string& text);

// Victims may come from every class except the target.
inline constexpr int kAnyClass = -1;
// Each poisoned sample gets a uniformly drawn wrong label.
inline constexpr int kRandomClass = -1;

struct PoisonSpec {
  PoisonMode mode = PoisonMode::kAppend;
  // Poisoned-sample count as a fraction of the dataset being poisoned.
  double fraction = 0.0;
  // Absolute count; overrides `fraction` when set.
  std::optional<std::size_t> count;
  int source_class = 0;
  int target_class = 8;
  NoiseSpec noise;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t victim_count(std::size_t dataset_size) const;
  std::string describe() const;
};

struct PoisonReport {
  PoisonMode mode = PoisonMode::kAppend;
  std::size_t victim_count = 0;
  // Replace: positions rewritten. Append: originals that were copied.
  std::vector<std::size_t> victim_indices;
  // Append only: [appended_begin, appended_end) holds the new samples.
  std::size_t appended_begin = 0;
  std::size_t appended_end = 0;
  NoiseSpec noise;
  std::size_t size_before = 0;
  std::size_t size_after = 0;
};

// round(fraction * N) (or the explicit count) indices, sorted, drawn
// without replacement from the eligible samples.
std::vector<std::size_t> select_victims(const Dataset& dataset,
                                        const PoisonSpec& spec);

std::pair<Dataset, PoisonReport> poison_replace(const Dataset& dataset,
                                                const PoisonSpec& spec);
std::pair<Dataset, PoisonReport> poison_append(const Dataset& dataset,
                                               const PoisonSpec& spec);
// Dispatches on spec.mode.
std::pair<Dataset, PoisonReport> apply_poison(const Dataset& dataset,
                                              const PoisonSpec& spec);

// Every eligible test image perturbed with the attack's noise; labels keep
// the ground truth.
Dataset build_trigger_set(const Dataset& test, const PoisonSpec& spec);

// Targeted: fraction predicted as target_class. Untargeted: fraction
// predicted as anything but the true label.
double trigger_success_rate(const PoisonSpec& spec, const Dataset& trigger_set,
                            std::span<const int> predictions);

}  // namespace mlsb
