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

#include "mlsb/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mlsb/digest.hpp"
#include "mlsb/errors.hpp"
#include "mlsb/rng.hpp"

namespace mlsb {

Dataset::Dataset()
    : pixels_(std::make_shared<const std::vector<double>>()),
      labels_(std::make_shared<const std::vector<int>>()),
      flags_(std::make_shared<const std::vector<std::uint8_t>>()) {}

Dataset::Dataset(std::vector<double> pixels, std::vector<int> labels,
                 std::vector<std::uint8_t> poison_flags) {
  const std::size_t n = labels.size();
  if (pixels.size() != n * kImagePixels || poison_flags.size() != n) {
    throw ConsistencyError("dataset parts disagree: " + std::to_string(n) +
                           " labels, " + std::to_string(pixels.size()) +
                           " pixels, " + std::to_string(poison_flags.size()) +
                           " flags");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= kNumClasses) {
      throw ValueError("label " + std::to_string(labels[i]) + " at sample " +
                       std::to_string(i) + " outside [0,10)");
    }
  }
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    if (!(pixels[i] >= 0.0 && pixels[i] <= 1.0)) {
      throw ValueError("pixel " + std::to_string(i % kImagePixels) +
                       " of sample " + std::to_string(i / kImagePixels) +
                       " outside [0,1]");
    }
  }
  pixels_ = std::make_shared<const std::vector<double>>(std::move(pixels));
  labels_ = std::make_shared<const std::vector<int>>(std::move(labels));
  flags_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(poison_flags));
}

std::span<const double> Dataset::image(std::size_t i) const {
  if (i >= size()) throw ValueError("sample index " + std::to_string(i) + " out of range");
  return std::span<const double>(*pixels_).subspan(i * kImagePixels, kImagePixels);
}

Tensor Dataset::images() const {
  return Tensor({size(), 1, kImageRows, kImageCols}, *pixels_);
}

Tensor Dataset::batch_images(std::span<const std::size_t> indices) const {
  std::vector<double> out;
  out.reserve(indices.size() * kImagePixels);
  for (std::size_t i : indices) {
    auto img = image(i);
    out.insert(out.end(), img.begin(), img.end());
  }
  return Tensor({indices.size(), 1, kImageRows, kImageCols}, std::move(out));
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels()[i]);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> pixels;
  std::vector<int> labels;
  std::vector<std::uint8_t> flags;
  pixels.reserve(indices.size() * kImagePixels);
  for (std::size_t i : indices) {
    auto img = image(i);
    pixels.insert(pixels.end(), img.begin(), img.end());
    labels.push_back((*labels_)[i]);
    flags.push_back((*flags_)[i]);
  }
  return Dataset(std::move(pixels), std::move(labels), std::move(flags));
}

Dataset Dataset::head(std::size_t n) const {
  if (n >= size()) return *this;
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return subset(idx);
}

std::size_t Dataset::count_label(int label) const {
  std::size_t n = 0;
  for (int l : *labels_) n += (l == label);
  return n;
}

bool Dataset::sample_equal(std::size_t i, const Dataset& other, std::size_t j) const {
  return labels()[i] == other.labels()[j] &&
         poison_flags()[i] == other.poison_flags()[j] &&
         std::memcmp(image(i).data(), other.image(j).data(),
                     kImagePixels * sizeof(double)) == 0;
}

std::string Dataset::prefix_hash(std::size_t n) const {
  if (n > size()) throw ValueError("prefix longer than dataset");
  std::vector<std::uint8_t> buf;
  buf.reserve(n * (kImagePixels * 8 + 5));
  const auto* px = reinterpret_cast<const std::uint8_t*>(pixels_->data());
  buf.insert(buf.end(), px, px + n * kImagePixels * sizeof(double));
  for (std::size_t i = 0; i < n; ++i) {
    const auto l = static_cast<std::uint32_t>((*labels_)[i]);
    for (int b = 0; b < 4; ++b) buf.push_back(static_cast<std::uint8_t>(l >> (8 * b)));
    buf.push_back((*flags_)[i]);
  }
  return to_hex(sha256(buf));
}

// ---------------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t at,
                        const char* what) {
  if (bytes.size() < at + 4) {
    throw TruncationError(std::string(what) + " header truncated");
  }
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> image_bytes,
                  std::span<const std::uint8_t> label_bytes) {
  const std::uint32_t image_magic = read_be32(image_bytes, 0, "image file");
  if (image_magic != kIdxImageMagic) {
    throw FormatError("image file magic is not 0x00000803");
  }
  const std::uint32_t label_magic = read_be32(label_bytes, 0, "label file");
  if (label_magic != kIdxLabelMagic) {
    throw FormatError("label file magic is not 0x00000801");
  }
  const std::size_t n = read_be32(image_bytes, 4, "image file");
  const std::size_t rows = read_be32(image_bytes, 8, "image file");
  const std::size_t cols = read_be32(image_bytes, 12, "image file");
  const std::size_t n_labels = read_be32(label_bytes, 4, "label file");
  if (rows != kImageRows || cols != kImageCols) {
    throw FormatError("expected 28x28 images, got " + std::to_string(rows) +
                      "x" + std::to_string(cols));
  }
  if (n != n_labels) {
    throw ConsistencyError("image file holds " + std::to_string(n) +
                           " samples but label file holds " +
                           std::to_string(n_labels));
  }
  const std::size_t image_payload = n * kImagePixels;
  if (image_bytes.size() - 16 < image_payload) {
    throw TruncationError("image payload truncated: expected " +
                          std::to_string(image_payload) + " bytes, got " +
                          std::to_string(image_bytes.size() - 16));
  }
  if (label_bytes.size() - 8 < n) {
    throw TruncationError("label payload truncated: expected " +
                          std::to_string(n) + " bytes, got " +
                          std::to_string(label_bytes.size() - 8));
  }
  if (image_bytes.size() - 16 > image_payload || label_bytes.size() - 8 > n) {
    throw FormatError("trailing bytes after IDX payload");
  }

  std::vector<double> pixels(image_payload);
  for (std::size_t i = 0; i < image_payload; ++i) {
    pixels[i] = static_cast<double>(image_bytes[16 + i]) / 255.0;
  }
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = label_bytes[8 + i];
    if (labels[i] >= kNumClasses) {
      throw FormatError("label " + std::to_string(labels[i]) + " at sample " +
                        std::to_string(i) + " is not a digit class");
    }
  }
  return Dataset(std::move(pixels), std::move(labels),
                 std::vector<std::uint8_t>(n, 0));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset load_idx(const std::filesystem::path& image_path,
                 const std::filesystem::path& label_path) {
  return parse_idx(read_file(image_path), read_file(label_path));
}

IdxBytes encode_idx(const Dataset& dataset) {
  const auto n = static_cast<std::uint32_t>(dataset.size());
  IdxBytes out;
  out.images.reserve(16 + dataset.pixels().size());
  put_be32(out.images, kIdxImageMagic);
  put_be32(out.images, n);
  put_be32(out.images, kImageRows);
  put_be32(out.images, kImageCols);
  for (double p : dataset.pixels()) {
    out.images.push_back(static_cast<std::uint8_t>(std::lround(p * 255.0)));
  }
  out.labels.reserve(8 + n);
  put_be32(out.labels, kIdxLabelMagic);
  put_be32(out.labels, n);
  for (int l : dataset.labels()) out.labels.push_back(static_cast<std::uint8_t>(l));
  return out;
}

void write_idx(const Dataset& dataset, const std::filesystem::path& image_path,
               const std::filesystem::path& label_path) {
  const IdxBytes bytes = encode_idx(dataset);
  write_file(image_path, bytes.images);
  write_file(label_path, bytes.labels);
}

// ---------------------------------------------------------------------------

BatchPlan::BatchPlan(std::size_t n, std::uint64_t seed, std::size_t batch_size)
    : seed_(seed), batch_size_(batch_size), order_(n) {
  if (batch_size == 0) throw ValueError("batch size must be positive");
  if (batch_size > n) {
    throw ValueError("batch size " + std::to_string(batch_size) +
                     " exceeds dataset size " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) order_[i] = i;
  Rng rng(derive_seed(seed, stream::kBatches));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order_[i - 1], order_[rng.below(i)]);
  }
}

std::size_t BatchPlan::batch_count() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

std::span<const std::size_t> BatchPlan::batch(std::size_t b) const {
  const std::size_t start = b * batch_size_;
  if (start >= order_.size()) throw ValueError("batch index out of range");
  return std::span<const std::size_t>(order_).subspan(
      start, std::min(batch_size_, order_.size() - start));
}

std::vector<std::vector<std::size_t>> batches(const Dataset& dataset,
                                              std::uint64_t seed,
                                              std::size_t batch_size) {
  const BatchPlan plan(dataset.size(), seed, batch_size);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < plan.batch_count(); ++b) {
    auto span = plan.batch(b);
    out.emplace_back(span.begin(), span.end());
  }
  return out;
}

}  // namespace mlsb
