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

#include "mlsb/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mlsb/errors.hpp"
#include "mlsb/rng.hpp"

namespace mlsb {
namespace {

void check_image(std::span<const double> image) {
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (!(image[i] >= 0.0 && image[i] <= 1.0)) {
      throw ValueError("pixel " + std::to_string(i) + " outside [0,1]");
    }
  }
}

}  // namespace

std::string noise_kind_name(NoiseKind kind) {
  return kind == NoiseKind::kSaltPepper ? "salt-pepper" : "gaussian";
}

NoiseKind parse_noise_kind(const std::string& text) {
  if (text == "salt-pepper") return NoiseKind::kSaltPepper;
  if (text == "gaussian") return NoiseKind::kGaussian;
  throw ValueError("unknown noise kind '" + text +
                   "' (expected salt-pepper or gaussian)");
}

NoiseSpec NoiseSpec::salt_pepper(double fraction, std::uint64_t seed) {
  NoiseSpec s{NoiseKind::kSaltPepper, fraction, seed};
  s.validate();
  return s;
}

NoiseSpec NoiseSpec::gaussian(double sigma, std::uint64_t seed) {
  NoiseSpec s{NoiseKind::kGaussian, sigma, seed};
  s.validate();
  return s;
}

void NoiseSpec::validate() const {
  if (kind == NoiseKind::kSaltPepper && !(level >= 0.0 && level <= 1.0)) {
    throw ValueError("salt-pepper fraction " + std::to_string(level) +
                     " outside [0,1]");
  }
  if (kind == NoiseKind::kGaussian && !(level >= 0.0 && std::isfinite(level))) {
    throw ValueError("gaussian sigma " + std::to_string(level) +
                     " must be finite and >= 0");
  }
}

std::string NoiseSpec::describe() const {
  std::ostringstream os;
  os << noise_kind_name(kind) << (kind == NoiseKind::kSaltPepper ? " p=" : " sigma=")
     << level << " seed=" << seed;
  return os.str();
}

double intensity_to_fraction(double intensity) { return intensity / 100.0; }

std::vector<double> apply_salt_pepper(std::span<const double> image,
                                      double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ValueError("salt-pepper fraction " + std::to_string(fraction) +
                     " outside [0,1]");
  }
  check_image(image);
  std::vector<double> out(image.begin(), image.end());
  const auto count = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(image.size())));
  if (count == 0) return out;

  std::vector<std::size_t> pos(image.size());
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(pos[i], pos[i + rng.below(pos.size() - i)]);
    out[pos[i]] = rng.coin() ? 1.0 : 0.0;
  }
  return out;
}

std::vector<double> gaussian_noise(std::size_t count, double sigma,
                                   std::uint64_t seed) {
  if (!(sigma >= 0.0)) {
    throw ValueError("gaussian sigma " + std::to_string(sigma) + " must be >= 0");
  }
  std::vector<double> noise(count, 0.0);
  if (sigma == 0.0) return noise;
  Rng rng(seed);
  for (double& v : noise) v = sigma * rng.normal();
  return noise;
}

std::vector<double> apply_gaussian(std::span<const double> image, double sigma,
                                   std::uint64_t seed) {
  if (!(sigma >= 0.0)) {
    throw ValueError("gaussian sigma " + std::to_string(sigma) + " must be >= 0");
  }
  check_image(image);
  std::vector<double> out(image.begin(), image.end());
  if (sigma == 0.0) return out;
  const std::vector<double> noise = gaussian_noise(image.size(), sigma, seed);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(out[i] + noise[i], 0.0, 1.0);
  }
  return out;
}

std::vector<double> apply_noise(std::span<const double> image,
                                const NoiseSpec& spec, std::uint64_t seed) {
  spec.validate();
  return spec.kind == NoiseKind::kSaltPepper
             ? apply_salt_pepper(image, spec.level, seed)
             : apply_gaussian(image, spec.level, seed);
}

}  // namespace mlsb
