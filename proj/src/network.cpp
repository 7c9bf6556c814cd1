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

#include "mlsb/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mlsb/errors.hpp"
#include "mlsb/rng.hpp"

namespace mlsb {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

ModelConfig ModelConfig::lenet() {
  ModelConfig c;
  c.layers = {ConvLayer{1, 6, 5, 2, 1}, ReluLayer{}, PoolLayer{2, 2},
              ConvLayer{6, 16, 5, 0, 1}, ReluLayer{}, PoolLayer{2, 2},
              DenseLayer{400, 120}, ReluLayer{}, DenseLayer{120, 84},
              ReluLayer{}, DenseLayer{84, 10}};
  c.input_shape = {1, 28, 28};
  c.num_classes = 10;
  return c;
}

std::vector<Shape> ModelConfig::validate() const {
  if (num_classes < 2) {
    throw ValueError("model needs at least 2 classes, got " +
                     std::to_string(num_classes));
  }
  if (layers.empty()) throw ShapeError("model has no layers");
  if (input_shape.empty() || element_count(input_shape) == 0) {
    throw ShapeError("model input shape must be non-empty and positive");
  }
  std::vector<Shape> shapes;
  Shape cur = input_shape;
  std::size_t index = 0;
  for (const LayerSpec& layer : layers) {
    const std::string where = "layer " + std::to_string(index++) + ": ";
    cur = std::visit(
        Overloaded{
            [&](const ConvLayer& l) -> Shape {
              if (cur.size() != 3 || cur[0] != l.in_channels) {
                throw ShapeError(where + "conv expects [" +
                                 std::to_string(l.in_channels) +
                                 ",H,W], got " + shape_string(cur));
              }
              if (l.kernel == 0 || l.stride == 0 || l.out_channels == 0) {
                throw ShapeError(where + "conv sizes must be positive");
              }
              const std::size_t ph = cur[1] + 2 * l.padding;
              const std::size_t pw = cur[2] + 2 * l.padding;
              if (ph < l.kernel || pw < l.kernel) {
                throw ShapeError(where + "conv kernel larger than input " +
                                 shape_string(cur));
              }
              return {l.out_channels, (ph - l.kernel) / l.stride + 1,
                      (pw - l.kernel) / l.stride + 1};
            },
            [&](const PoolLayer& l) -> Shape {
              if (cur.size() != 3) {
                throw ShapeError(where + "pool expects [C,H,W], got " +
                                 shape_string(cur));
              }
              if (l.window == 0 || l.stride == 0 || cur[1] < l.window ||
                  cur[2] < l.window) {
                throw ShapeError(where + "pool window " +
                                 std::to_string(l.window) +
                                 " does not fit " + shape_string(cur));
              }
              return {cur[0], (cur[1] - l.window) / l.stride + 1,
                      (cur[2] - l.window) / l.stride + 1};
            },
            [&](const ReluLayer&) -> Shape { return cur; },
            [&](const DenseLayer& l) -> Shape {
              if (element_count(cur) != l.in_features || l.out_features == 0) {
                throw ShapeError(where + "dense expects " +
                                 std::to_string(l.in_features) +
                                 " features, got " + shape_string(cur));
              }
              return {l.out_features};
            }},
        layer);
    shapes.push_back(cur);
  }
  if (cur != Shape{num_classes}) {
    throw ShapeError("model output " + shape_string(cur) + " does not match " +
                     std::to_string(num_classes) + " classes");
  }
  return shapes;
}

std::string ModelConfig::canonical_text() const {
  std::ostringstream os;
  os << "input=" << shape_string(input_shape) << ";classes=" << num_classes;
  for (const LayerSpec& layer : layers) {
    os << ';';
    std::visit(Overloaded{[&](const ConvLayer& l) {
                            os << "conv(" << l.in_channels << ','
                               << l.out_channels << ',' << l.kernel << ",p"
                               << l.padding << ",s" << l.stride << ')';
                          },
                          [&](const PoolLayer& l) {
                            os << "pool(" << l.window << ",s" << l.stride << ')';
                          },
                          [&](const ReluLayer&) { os << "relu"; },
                          [&](const DenseLayer& l) {
                            os << "dense(" << l.in_features << ','
                               << l.out_features << ')';
                          }},
               layer);
  }
  return os.str();
}

Digest ModelConfig::digest() const { return sha256(canonical_text()); }

// ---------------------------------------------------------------------------

std::size_t Parameters::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

bool Parameters::bitwise_equal(const Parameters& other) const {
  if (count() != other.count()) return false;
  for (std::size_t i = 0; i < count(); ++i) {
    if (entries_[i].name != other.entries_[i].name ||
        !entries_[i].value.bitwise_equal(other.entries_[i].value)) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

Model::Model(ModelConfig config)
    : config_(std::move(config)), activation_shapes_(config_.validate()) {}

std::vector<std::pair<std::string, Shape>> Model::parameter_layout() const {
  std::vector<std::pair<std::string, Shape>> out;
  std::size_t conv = 0, fc = 0;
  for (const LayerSpec& layer : config_.layers) {
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      const std::string name = "conv" + std::to_string(++conv);
      out.emplace_back(name + ".weight",
                       Shape{c->out_channels, c->in_channels, c->kernel, c->kernel});
      out.emplace_back(name + ".bias", Shape{c->out_channels});
    } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      const std::string name = "fc" + std::to_string(++fc);
      out.emplace_back(name + ".weight", Shape{d->in_features, d->out_features});
      out.emplace_back(name + ".bias", Shape{d->out_features});
    }
  }
  return out;
}

Parameters Model::initialize(std::uint64_t seed) const {
  std::vector<NamedTensor> entries;
  std::uint64_t index = 0;
  for (const auto& [name, shape] : parameter_layout()) {
    const bool is_bias = shape.size() == 1;
    if (is_bias) {
      entries.push_back({name, Tensor::zeros(shape)});
    } else {
      // conv [F,C,k,k] has fan-in C*k*k; dense [D,K] has fan-in D.
      const std::size_t fan_in =
          shape.size() == 4 ? shape[1] * shape[2] * shape[3] : shape[0];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      Rng rng(derive_seed(seed, stream::kInit, index));
      entries.push_back({name, Tensor::uniform(shape, -bound, bound, rng)});
    }
    ++index;
  }
  return Parameters(std::move(entries));
}

void Model::check_parameters(const Parameters& params) const {
  const auto layout = parameter_layout();
  if (params.count() != layout.size()) {
    throw ShapeError("expected " + std::to_string(layout.size()) +
                     " parameter tensors, got " + std::to_string(params.count()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params[i].name != layout[i].first ||
        params[i].value.shape() != layout[i].second) {
      throw ShapeError("parameter " + std::to_string(i) + " is " +
                       params[i].name + shape_string(params[i].value.shape()) +
                       ", expected " + layout[i].first +
                       shape_string(layout[i].second));
    }
  }
}

void Model::check_images(const Tensor& images) const {
  const Shape& s = images.shape();
  const Shape& in = config_.input_shape;
  if (s.size() != in.size() + 1 || !std::equal(in.begin(), in.end(), s.begin() + 1)) {
    throw ShapeError("model expects images [N," + shape_string(in).substr(1) +
                     ", got " + shape_string(s));
  }
}

std::vector<Var> Model::bind(Tape& tape, const Parameters& params,
                             bool requires_grad) const {
  check_parameters(params);
  std::vector<Var> vars;
  vars.reserve(params.count());
  for (const auto& p : params) {
    vars.push_back(tape.leaf(p.value.with_requires_grad(requires_grad)));
  }
  return vars;
}

Var Model::forward(Tape& tape, Var images, std::span<const Var> params) const {
  check_images(tape.value(images));
  Var cur = images;
  std::size_t p = 0;
  auto next_param = [&]() {
    if (p >= params.size()) throw ShapeError("too few parameters for model");
    return params[p++];
  };
  for (const LayerSpec& layer : config_.layers) {
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      const Var w = next_param();
      const Var b = next_param();
      cur = ops::conv2d(tape, cur, w, b, {c->stride, c->padding, false});
    } else if (const auto* pl = std::get_if<PoolLayer>(&layer)) {
      cur = ops::max_pool2d(tape, cur, pl->window, pl->stride);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      cur = ops::relu(tape, cur);
    } else {
      if (tape.value(cur).rank() > 2) cur = ops::flatten(tape, cur);
      const Var w = next_param();
      const Var b = next_param();
      cur = ops::dense(tape, cur, w, b);
    }
  }
  if (p != params.size()) throw ShapeError("too many parameters for model");
  return cur;
}

std::pair<Parameters, Model> build_lenet(const ModelConfig& config,
                                         std::uint64_t seed) {
  Model model(config);
  Parameters params = model.initialize(seed);
  return {std::move(params), std::move(model)};
}

// ---------------------------------------------------------------------------

FrozenModel::FrozenModel(const Model& model, Parameters params)
    : model_(&model), params_(std::move(params)) {
  model.check_parameters(params_);
}

const Shape& FrozenModel::sample_shape() const {
  return model_->config().input_shape;
}

std::size_t FrozenModel::num_classes() const { return model_->num_classes(); }

Var FrozenModel::logits(Tape& tape, Var batch) const {
  std::vector<Var> vars;
  vars.reserve(params_.count());
  for (const auto& p : params_) vars.push_back(tape.constant(p.value));
  return model_->forward(tape, batch, vars);
}

int argmax(std::span<const double> row) {
  int best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
  }
  return best;
}

Prediction predict(const Classifier& classifier, const Tensor& images) {
  const Shape& sample = classifier.sample_shape();
  const Shape& s = images.shape();
  if (s.size() != sample.size() + 1 ||
      !std::equal(sample.begin(), sample.end(), s.begin() + 1)) {
    throw ShapeError("predict expects [N," + shape_string(sample).substr(1) +
                     ", got " + shape_string(s));
  }
  const std::size_t n = s[0];
  const std::size_t per = element_count(sample);
  const std::size_t k = classifier.num_classes();
  constexpr std::size_t kChunk = 256;

  Prediction out;
  out.labels.resize(n);
  std::vector<double> conf(n * k);
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t len = std::min(kChunk, n - start);
    Shape chunk_shape = s;
    chunk_shape[0] = len;
    std::vector<double> chunk(images.data() + start * per,
                              images.data() + (start + len) * per);
    Tape tape;
    const Var x = tape.constant(Tensor(chunk_shape, std::move(chunk)));
    const Tensor probs = softmax_rows(tape.value(classifier.logits(tape, x)));
    std::copy(probs.data(), probs.data() + len * k, conf.begin() + start * k);
    for (std::size_t r = 0; r < len; ++r) {
      out.labels[start + r] =
          argmax(std::span<const double>(probs.data() + r * k, k));
    }
  }
  out.confidences = Tensor({n, k}, std::move(conf));
  return out;
}

// ---------------------------------------------------------------------------

StepResult train_step(const Model& model, const Parameters& params,
                      OptimizerState& opt, const Tensor& images,
                      std::span<const int> labels) {
  if (images.dim(0) == 0 || labels.empty()) {
    throw ValueError("train_step needs a nonempty batch");
  }
  Tape tape;
  const std::vector<Var> vars = model.bind(tape, params, true);
  const Var x = tape.constant(images);
  const Var loss = ops::softmax_cross_entropy(
      tape, model.forward(tape, x, vars), labels);
  const double loss_value = tape.value(loss).item();
  if (!std::isfinite(loss_value)) {
    throw TrainingDivergedError("non-finite batch loss " +
                                std::to_string(loss_value) +
                                "; training aborted");
  }
  const GradientMap grads = tape.backward(loss);

  if (opt.velocity.empty()) {
    for (const auto& p : params) opt.velocity.push_back(Tensor::zeros(p.value.shape()));
  }
  if (opt.velocity.size() != params.count()) {
    throw ShapeError("optimizer velocity does not mirror the parameters");
  }

  std::vector<NamedTensor> updated;
  updated.reserve(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) {
    const Tensor& g = grads.at(vars[i]);
    std::vector<double> v = opt.velocity[i].to_vector();
    std::vector<double> w = params[i].value.to_vector();
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = opt.momentum * v[j] + g[j];
      w[j] = w[j] - opt.learning_rate * v[j];
    }
    opt.velocity[i] = Tensor(g.shape(), std::move(v));
    updated.push_back({params[i].name, Tensor(g.shape(), std::move(w))});
  }
  return {Parameters(std::move(updated)), loss_value};
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'L', 'S', 'B'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool done() const { return pos_ == bytes_.size(); }

  std::span<const std::uint8_t> take(std::size_t n) {
    if (bytes_.size() - pos_ < n) {
      throw TruncationError("model file truncated at byte " + std::to_string(pos_));
    }
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }

  double f64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return std::bit_cast<double>(v);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_parameters(const ModelConfig& config,
                                            const Parameters& params) {
  Model(config).check_parameters(params);
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kModelFormatVersion);
  const Digest d = config.digest();
  out.insert(out.end(), d.begin(), d.end());
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t dim : p.value.shape()) put_u32(out, static_cast<std::uint32_t>(dim));
    for (double v : p.value.values()) put_f64(out, v);
  }
  return out;
}

Parameters decode_parameters(std::span<const std::uint8_t> bytes,
                             const ModelConfig& config) {
  Reader in(bytes);
  auto magic = in.take(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw FormatError("not a model file: bad magic bytes");
  }
  const std::uint8_t version = in.take(1)[0];
  if (version != kModelFormatVersion) {
    throw VersionError("model format version " + std::to_string(version) +
                       " is not supported (expected " +
                       std::to_string(kModelFormatVersion) + ")");
  }
  auto stored = in.take(32);
  const Digest expected = config.digest();
  if (!std::equal(stored.begin(), stored.end(), expected.begin())) {
    throw DigestMismatchError("model file was written for a different model "
                              "config (digest mismatch)");
  }
  std::vector<NamedTensor> entries;
  while (!in.done()) {
    const std::uint32_t name_len = in.u32();
    auto name_bytes = in.take(name_len);
    std::string name(name_bytes.begin(), name_bytes.end());
    const std::uint32_t rank = in.u32();
    if (rank == 0 || rank > 8) {
      throw FormatError("parameter " + name + " has invalid rank " + std::to_string(rank));
    }
    Shape shape(rank);
    for (auto& d : shape) d = in.u32();
    const std::size_t n = element_count(shape);
    std::vector<double> values(n);
    for (auto& v : values) v = in.f64();
    entries.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  Parameters params(std::move(entries));
  Model(config).check_parameters(params);
  return params;
}

void save_parameters(const std::filesystem::path& path,
                     const ModelConfig& config, const Parameters& params) {
  const auto bytes = encode_parameters(config, params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Parameters load_parameters(const std::filesystem::path& path,
                           const ModelConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_parameters(bytes, config);
}

}  // namespace mlsb
