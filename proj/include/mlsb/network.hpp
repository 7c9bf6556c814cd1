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
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mlsb/autograd.hpp"
#include "mlsb/digest.hpp"
#include "mlsb/tensor.hpp"

namespace mlsb {

struct ConvLayer {
  std::size_t in_channels;
  std::size_t out_channels;
  std::size_t kernel;
  std::size_t padding = 0;
  std::size_t stride = 1;
};

struct PoolLayer {
  std::size_t window;
  std::size_t stride;
};

struct ReluLayer {};

// Flattens its input when that input has rank > 1.
struct DenseLayer {
  std::size_t in_features;
  std::size_t out_features;
};

using LayerSpec = std::variant<ConvLayer, PoolLayer, ReluLayer, DenseLayer>;

struct ModelConfig {
  std::vector<LayerSpec> layers;
  Shape input_shape{1, 28, 28};
  std::size_t num_classes = 10;

  // conv(1->6, 5x5, pad 2) relu pool(2) conv(6->16, 5x5) relu pool(2)
  // dense(400->120) relu dense(120->84) relu dense(84->10)
  static ModelConfig lenet();

  // Per-sample activation shape after each layer. Throws ShapeError on an
  // incompatible chain and ValueError on a bad class count.
  std::vector<Shape> validate() const;

  // Stable textual description; the digest hashes exactly this text.
  std::string canonical_text() const;
  Digest digest() const;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

// Weight and bias tensors in layer order ("conv1.weight", "conv1.bias", ...).
class Parameters {
 public:
  Parameters() = default;
  explicit Parameters(std::vector<NamedTensor> entries)
      : entries_(std::move(entries)) {}

  std::size_t count() const { return entries_.size(); }
  std::size_t total_elements() const;
  const NamedTensor& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<NamedTensor>& entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  bool bitwise_equal(const Parameters& other) const;

 private:
  std::vector<NamedTensor> entries_;
};

// Executable form of a validated ModelConfig.
class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  std::size_t num_classes() const { return config_.num_classes; }

  // Expected parameter names and shapes, in order.
  std::vector<std::pair<std::string, Shape>> parameter_layout() const;

  // Fan-in uniform weights (bound sqrt(6 / fan_in)) and zero biases.
  Parameters initialize(std::uint64_t seed) const;

  // images [N, input_shape...] -> logits [N, K]. `params` are tape values
  // matching parameter_layout().
  Var forward(Tape& tape, Var images, std::span<const Var> params) const;

  // Records every parameter as a leaf (targets iff requires_grad).
  std::vector<Var> bind(Tape& tape, const Parameters& params,
                        bool requires_grad) const;

  void check_parameters(const Parameters& params) const;
  void check_images(const Tensor& images) const;

 private:
  ModelConfig config_;
  std::vector<Shape> activation_shapes_;
};

// Builds the model and its seed-deterministic initial parameters.
std::pair<Parameters, Model> build_lenet(const ModelConfig& config,
                                         std::uint64_t seed);

// Anything that maps an input batch to logits on a tape; the attacks work
// against this interface.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual const Shape& sample_shape() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual Var logits(Tape& tape, Var batch) const = 0;
};

// A Model with a fixed parameter set.
class FrozenModel : public Classifier {
 public:
  FrozenModel(const Model& model, Parameters params);

  const Shape& sample_shape() const override;
  std::size_t num_classes() const override;
  Var logits(Tape& tape, Var batch) const override;

  const Model& model() const { return *model_; }
  const Parameters& parameters() const { return params_; }

 private:
  const Model* model_;
  Parameters params_;
};

struct Prediction {
  std::vector<int> labels;
  Tensor confidences;  // [N, K] softmax rows
};

// Lowest index wins ties.
int argmax(std::span<const double> row);

Prediction predict(const Classifier& classifier, const Tensor& images);

struct OptimizerState {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::vector<Tensor> velocity;  // mirrors Parameters; empty until first step

  OptimizerState() = default;
  OptimizerState(double lr, double mom) : learning_rate(lr), momentum(mom) {}
};

struct StepResult {
  Parameters params;
  double loss;  // before the update
};

// One SGD-with-momentum step: v <- momentum*v + g; w <- w - lr*v.
StepResult train_step(const Model& model, const Parameters& params,
                      OptimizerState& opt, const Tensor& images,
                      std::span<const int> labels);

// Model file: "MLSB", version byte, 32-byte config digest, then per
// parameter (u32 name length, name, u32 rank, u32 dims, f64 payload), all
// little-endian.
inline constexpr std::uint8_t kModelFormatVersion = 1;

void save_parameters(const std::filesystem::path& path,
                     const ModelConfig& config, const Parameters& params);
Parameters load_parameters(const std::filesystem::path& path,
                           const ModelConfig& config);

std::vector<std::uint8_t> encode_parameters(const ModelConfig& config,
                                            const Parameters& params);
Parameters decode_parameters(std::span<const std::uint8_t> bytes,
                             const ModelConfig& config);

}  // namespace mlsb
