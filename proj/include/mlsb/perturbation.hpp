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
#include <span>
#include <string>
#include <vector>

namespace mlsb {

enum class NoiseKind { kSaltPepper, kGaussian };

std::string noise_kind_name(NoiseKind kind);
// Accepts "salt-pepper" and "gaussian".
NoiseKind parse_noise_kind(const std::string& text);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kSaltPepper;
  // Salt & pepper: fraction of pixels corrupted, in [0,1].
  // Gaussian: standard deviation in [0,1] pixel units, >= 0.
  double level = 0.0;
  std::uint64_t seed = 0;

  static NoiseSpec salt_pepper(double fraction, std::uint64_t seed);
  static NoiseSpec gaussian(double sigma, std::uint64_t seed);

  void validate() const;
  std::string describe() const;
};

// An intensity of n corrupts n percent of the pixels.
double intensity_to_fraction(double intensity);

// Exactly round(p * size) distinct pixels are set to 0 or 1 (even odds);
// every other pixel is copied unchanged.
std::vector<double> apply_salt_pepper(std::span<const double> image,
                                      double fraction, std::uint64_t seed);

// Zero-mean normal noise added before clamping.
std::vector<double> gaussian_noise(std::size_t count, double sigma,
                                   std::uint64_t seed);

// image + gaussian_noise(...) clamped to [0,1].
std::vector<double> apply_gaussian(std::span<const double> image, double sigma,
                                   std::uint64_t seed);

// Dispatches on spec.kind with an explicit per-sample seed.
std::vector<double> apply_noise(std::span<const double> image,
                                const NoiseSpec& spec, std::uint64_t seed);

}  // namespace mlsb
