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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "mlsb/errors.hpp"
#include "mlsb/network.hpp"
#include "mlsb/rng.hpp"
#include "test_util.hpp"

namespace mlsb {
namespace {

using testing::random_tensor;

TEST(LeNet, ParameterCountAndLayout) {
  const auto [params, model] = build_lenet(ModelConfig::lenet(), 1);
  EXPECT_EQ(params.total_elements(), 61706u);
  const auto layout = model.parameter_layout();
  ASSERT_EQ(layout.size(), 10u);
  EXPECT_EQ(layout[0].first, "conv1.weight");
  EXPECT_EQ(layout[0].second, (Shape{6, 1, 5, 5}));
  EXPECT_EQ(layout[2].second, (Shape{16, 6, 5, 5}));
  EXPECT_EQ(layout[4].second, (Shape{400, 120}));
  EXPECT_EQ(layout[9].first, "fc3.bias");
  EXPECT_EQ(layout[9].second, (Shape{10}));
}

TEST(LeNet, ActivationShapes) {
  const auto shapes = ModelConfig::lenet().validate();
  EXPECT_EQ(shapes.front(), (Shape{6, 28, 28}));
  EXPECT_EQ(shapes.back(), (Shape{10}));
}

TEST(LeNet, InitializationIsSeeded) {
  const Model model(ModelConfig::lenet());
  const Parameters a = model.initialize(5), b = model.initialize(5), c = model.initialize(6);
  EXPECT_TRUE(a.bitwise_equal(b));
  EXPECT_FALSE(a.bitwise_equal(c));
  for (const auto& p : a) {
    if (p.value.rank() == 1) {
      for (double v : p.value.values()) EXPECT_EQ(v, 0.0) << p.name;
      continue;
    }
    const double fan_in = p.value.rank() == 4
                              ? double(p.value.dim(1) * p.value.dim(2) * p.value.dim(3))
                              : double(p.value.dim(0));
    const double bound = std::sqrt(6.0 / fan_in);
    for (double v : p.value.values()) EXPECT_LE(std::abs(v), bound) << p.name;
  }
}

TEST(LeNet, ForwardShapeAndPredict) {
  const auto [params, model] = build_lenet(ModelConfig::lenet(), 2);
  const FrozenModel frozen(model, params);
  const Tensor x = random_tensor({3, 1, 28, 28}, 9, 0.0, 1.0);
  Tape tape;
  EXPECT_EQ(tape.value(frozen.logits(tape, tape.constant(x))).shape(), (Shape{3, 10}));
  const Prediction p = predict(frozen, x);
  ASSERT_EQ(p.labels.size(), 3u);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < 10; ++k) s += p.confidences[r * 10 + k];
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_EQ(p.labels[r],
              argmax(std::span<const double>(p.confidences.data() + r * 10, 10)));
  }
}

TEST(LeNet, PredictChunkingDoesNotChangeResults) {
  const auto [params, model] = build_lenet(ModelConfig::lenet(), 2);
  const FrozenModel frozen(model, params);
  const Tensor x = random_tensor({300, 1, 28, 28}, 10, 0.0, 1.0);
  const Prediction all = predict(frozen, x);
  const Tensor last(Shape{1, 1, 28, 28},
                    std::vector<double>(x.values().end() - 784, x.values().end()));
  const Prediction one = predict(frozen, last);
  for (std::size_t k = 0; k < 10; ++k) {
    EXPECT_EQ(one.confidences[k], all.confidences[299 * 10 + k]);
  }
}

TEST(Argmax, LowestIndexWinsTies) {
  const std::vector<double> v{0.1, 0.5, 0.5, 0.2};
  EXPECT_EQ(argmax(v), 1);
}

TEST(ModelConfig, RejectsBadGeometry) {
  ModelConfig c = ModelConfig::lenet();
  c.num_classes = 1;
  EXPECT_THROW(c.validate(), ValueError);
  c = ModelConfig::lenet();
  std::get<DenseLayer>(c.layers[6]).in_features = 401;
  EXPECT_THROW(c.validate(), ShapeError);
  c = ModelConfig::lenet();
  c.layers.clear();
  EXPECT_THROW(c.validate(), ShapeError);
}

TEST(ModelConfig, DigestTracksStructure) {
  ModelConfig a = ModelConfig::lenet(), b = ModelConfig::lenet();
  EXPECT_EQ(a.digest(), b.digest());
  std::get<ConvLayer>(b.layers[0]).padding = 1;
  EXPECT_NE(a.digest(), b.digest());
}

TEST(LeNet, RejectsWrongInputs) {
  const auto [params, model] = build_lenet(ModelConfig::lenet(), 2);
  EXPECT_THROW(model.check_images(Tensor::zeros({2, 1, 27, 28})), ShapeError);
  std::vector<NamedTensor> fewer(params.begin(), params.end() - 1);
  EXPECT_THROW(FrozenModel(model, Parameters(fewer)), ShapeError);
}

// --- optimizer ---------------------------------------------------------------

struct Batch {
  Tensor images;
  std::vector<int> labels;
};

Batch random_batch(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> labels(n);
  for (int& l : labels) l = static_cast<int>(rng.below(10));
  return {random_tensor({n, 1, 28, 28}, seed + 1, 0.0, 1.0), labels};
}

std::vector<Tensor> gradients(const Model& model, const Parameters& params, const Batch& b) {
  Tape tape;
  const auto vars = model.bind(tape, params, true);
  const Var loss = ops::softmax_cross_entropy(
      tape, model.forward(tape, tape.constant(b.images), vars), b.labels);
  const GradientMap g = tape.backward(loss);
  std::vector<Tensor> out;
  for (const Var& v : vars) out.push_back(g.at(v));
  return out;
}

TEST(TrainStep, ZeroLearningRateKeepsParameters) {
  const auto [params, model] = build_lenet(ModelConfig::lenet(), 3);
  OptimizerState opt(0.0, 0.9);
  const Batch b = random_batch(8, 1);
  const StepResult r = train_step(model, params, opt, b.images, b.labels);
  EXPECT_TRUE(r.params.bitwise_equal(params));
  EXPECT_GT(r.loss, 0.0);
}

TEST(TrainStep, PlainSgdWithoutMomentum) {
  const auto [params, model] = build_lenet(ModelConfig::lenet(), 3);
  OptimizerState opt(0.05, 0.0);
  const Batch b = random_batch(8, 2);
  const auto g = gradients(model, params, b);
  const StepResult r = train_step(model, params, opt, b.images, b.labels);
  for (std::size_t i = 0; i < params.count(); ++i) {
    for (std::size_t j = 0; j < g[i].size(); ++j) {
      ASSERT_EQ(r.params[i].value[j], params[i].value[j] - 0.05 * g[i][j]);
    }
  }
}

TEST(TrainStep, MomentumAccumulatesVelocity) {
  const auto [p0, model] = build_lenet(ModelConfig::lenet(), 3);
  OptimizerState opt(0.01, 0.9);
  const Batch b1 = random_batch(4, 3), b2 = random_batch(4, 4);
  const auto g1 = gradients(model, p0, b1);
  const Parameters p1 = train_step(model, p0, opt, b1.images, b1.labels).params;
  const auto g2 = gradients(model, p1, b2);
  const Parameters p2 = train_step(model, p1, opt, b2.images, b2.labels).params;
  for (std::size_t i = 0; i < p0.count(); ++i) {
    for (std::size_t j = 0; j < g1[i].size(); j += 7) {
      const double v1 = g1[i][j];
      const double v2 = 0.9 * v1 + g2[i][j];
      ASSERT_EQ(p2[i].value[j], p1[i].value[j] - 0.01 * v2);
    }
  }
}

TEST(TrainStep, Errors) {
  const auto [params, model] = build_lenet(ModelConfig::lenet(), 3);
  OptimizerState opt;
  const Batch b = random_batch(2, 5);
  EXPECT_THROW(train_step(model, params, opt, b.images, std::span<const int>()), ValueError);
  std::vector<NamedTensor> poisoned(params.begin(), params.end());
  std::vector<double> bias = poisoned.back().value.to_vector();
  bias[3] = std::nan("");
  poisoned.back().value = Tensor(poisoned.back().value.shape(), bias);
  EXPECT_THROW(train_step(model, Parameters(poisoned), opt, b.images, b.labels),
               TrainingDivergedError);
}

// --- persistence -------------------------------------------------------------

TEST(ModelFile, RoundTripIsBitwise) {
  const ModelConfig cfg = ModelConfig::lenet();
  const auto [params, model] = build_lenet(cfg, 7);
  const auto path = std::filesystem::temp_directory_path() / "mlsb_model_roundtrip.mlsb";
  save_parameters(path, cfg, params);
  EXPECT_TRUE(load_parameters(path, cfg).bitwise_equal(params));
  std::filesystem::remove(path);
}

TEST(ModelFile, DetectsCorruption) {
  const ModelConfig cfg = ModelConfig::lenet();
  const auto [params, model] = build_lenet(cfg, 7);
  const auto bytes = encode_parameters(cfg, params);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_parameters(bad_magic, cfg), FormatError);

  auto bad_version = bytes;
  bad_version[4] = kModelFormatVersion + 1;
  EXPECT_THROW(decode_parameters(bad_version, cfg), VersionError);

  ModelConfig other = cfg;
  std::get<ConvLayer>(other.layers[0]).padding = 1;
  EXPECT_THROW(decode_parameters(bytes, other), DigestMismatchError);

  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 5);
  EXPECT_THROW(decode_parameters(cut, cfg), TruncationError);

  const std::vector<std::uint8_t> header_only(bytes.begin(), bytes.begin() + 20);
  EXPECT_THROW(decode_parameters(header_only, cfg), TruncationError);

  EXPECT_THROW(load_parameters("/nonexistent/dir/model.mlsb", cfg), IoError);
}

}  // namespace
}  // namespace mlsb
