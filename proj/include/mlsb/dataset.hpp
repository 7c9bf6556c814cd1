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
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "mlsb/tensor.hpp"

namespace mlsb {

inline constexpr std::size_t kImageRows = 28;
inline constexpr std::size_t kImageCols = 28;
inline constexpr std::size_t kImagePixels = kImageRows * kImageCols;
inline constexpr int kNumClasses = 10;

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// N grayscale 28x28 images in [0,1] with class labels and a flag per sample
// marking injected or modified entries. Immutable once built; copies share
// storage.
class Dataset {
 public:
  Dataset();
  Dataset(std::vector<double> pixels, std::vector<int> labels,
          std::vector<std::uint8_t> poison_flags);

  std::size_t size() const { return labels_->size(); }
  bool empty() const { return size() == 0; }

  std::span<const double> pixels() const { return *pixels_; }
  std::span<const double> image(std::size_t i) const;
  std::span<const int> labels() const { return *labels_; }
  std::span<const std::uint8_t> poison_flags() const { return *flags_; }

  // [N,1,28,28]; throws ShapeError on an empty dataset.
  Tensor images() const;
  // Gathers the listed samples into [k,1,28,28].
  Tensor batch_images(std::span<const std::size_t> indices) const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;

  Dataset subset(std::span<const std::size_t> indices) const;
  // First min(n, size()) samples.
  Dataset head(std::size_t n) const;

  std::size_t count_label(int label) const;

  // Bitwise equality of sample i here and sample j in `other`.
  bool sample_equal(std::size_t i, const Dataset& other, std::size_t j) const;

  // SHA-256 over the first n samples (pixels, labels, flags).
  std::string prefix_hash(std::size_t n) const;

 private:
  std::shared_ptr<const std::vector<double>> pixels_;
  std::shared_ptr<const std::vector<int>> labels_;
  std::shared_ptr<const std::vector<std::uint8_t>> flags_;
};

// Decodes an IDX image/label pair. Pixels are divided by 255.
Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::span<const std::uint8_t> label_bytes);
Dataset load_idx(const std::filesystem::path& image_path,
                 const std::filesystem::path& label_path);

struct IdxBytes {
  std::vector<std::uint8_t> images;
  std::vector<std::uint8_t> labels;
};

// Pixels are re-quantized as round(p * 255).
IdxBytes encode_idx(const Dataset& dataset);
void write_idx(const Dataset& dataset, const std::filesystem::path& image_path,
               const std::filesystem::path& label_path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

// One epoch's sample order.
class BatchPlan {
 public:
  BatchPlan(std::size_t n, std::uint64_t seed, std::size_t batch_size);

  std::uint64_t seed() const { return seed_; }
  std::size_t batch_size() const { return batch_size_; }
  std::span<const std::size_t> permutation() const { return order_; }
  std::size_t batch_count() const;
  // The last batch may be smaller.
  std::span<const std::size_t> batch(std::size_t b) const;

 private:
  std::uint64_t seed_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
};

std::vector<std::vector<std::size_t>> batches(const Dataset& dataset,
                                              std::uint64_t seed,
                                              std::size_t batch_size);

}  // namespace mlsb
