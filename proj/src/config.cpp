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

#include "mlsb/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mlsb/errors.hpp"

namespace mlsb {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* expected) {
  throw ConfigError("key '" + key + "': expected " + expected + ", got '" +
                    value + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) bad_value(key, text, "a number");
  return v;
}

}  // namespace

ConfigMap ConfigMap::parse(std::string_view text) {
  ConfigMap out;
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + body + "'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    if (out.has(key)) {
      throw ConfigError("key '" + key + "' given twice (line " +
                        std::to_string(line_no) + ")");
    }
    out.set(key, trim(std::string_view(body).substr(eq + 1)));
  }
  return out;
}

ConfigMap ConfigMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

const std::string& ConfigMap::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("key '" + key + "' is not set");
  return it->second;
}

double ConfigMap::get_double(const std::string& key) const {
  return to_double(key, get(key));
}

std::int64_t ConfigMap::get_int(const std::string& key) const {
  const std::string& text = get(key);
  std::int64_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) bad_value(key, text, "an integer");
  return v;
}

std::uint64_t ConfigMap::get_uint(const std::string& key) const {
  const std::int64_t v = get_int(key);
  if (v < 0) bad_value(key, get(key), "a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

std::vector<double> ConfigMap::get_double_list(const std::string& key) const {
  std::vector<double> out;
  const std::string& text = get(key);
  if (trim(text).empty()) return out;
  for (const std::string& item : split_list(text)) out.push_back(to_double(key, item));
  return out;
}

std::vector<std::uint64_t> ConfigMap::get_uint_list(const std::string& key) const {
  std::vector<std::uint64_t> out;
  const std::string& text = get(key);
  if (trim(text).empty()) return out;
  for (const std::string& item : split_list(text)) {
    std::uint64_t v = 0;
    const char* end = item.data() + item.size();
    auto [ptr, ec] = std::from_chars(item.data(), end, v);
    if (ec != std::errc() || ptr != end || item.empty()) {
      bad_value(key, text, "a comma-separated list of non-negative integers");
    }
    out.push_back(v);
  }
  return out;
}

std::string ConfigMap::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

Digest ConfigMap::digest() const { return sha256(canonical_text()); }

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      // data
      {"train-images", "data/mnist/train-images-idx3-ubyte", "training images (IDX)"},
      {"train-labels", "data/mnist/train-labels-idx1-ubyte", "training labels (IDX)"},
      {"test-images", "data/mnist/t10k-images-idx3-ubyte", "test images (IDX)"},
      {"test-labels", "data/mnist/t10k-labels-idx1-ubyte", "test labels (IDX)"},
      {"train-limit", "0", "use only the first N training samples (0 = all)"},
      {"test-limit", "0", "use only the first N test samples (0 = all)"},
      // training
      {"epochs", "10", "training epochs"},
      {"lr", "0.01", "SGD learning rate"},
      {"momentum", "0.9", "SGD momentum in [0,1)"},
      {"batch-size", "64", "mini-batch size"},
      {"seeds", "1,2,3", "run seeds"},
      {"workers", "1", "concurrent grid cells"},
      {"out-dir", "out", "output directory"},
      // poisoning (poison and compare subcommands)
      {"mode", "append", "poison mode: replace | append"},
      {"fraction", "0.03", "poisoned fraction of the training split"},
      {"count", "2100", "absolute poisoned-sample count (0 = use fraction)"},
      {"source-class", "0", "class carrying the trigger, or 'any'"},
      {"target-class", "8", "label given to poisoned samples, or 'random'"},
      {"noise", "salt-pepper", "noise kind: salt-pepper | gaussian"},
      {"intensity", "0.10", "salt-pepper pixel fraction or gaussian sigma"},
      // sweep grid
      {"sweep-mode", "replace", "poison mode used by the sweep"},
      {"sweep-fractions", "0.01,0.05,0.10,0.20,0.40", "poisoned fractions"},
      {"sweep-salt-pepper", "0.10,0.25,0.50", "salt-pepper pixel fractions"},
      {"sweep-gaussian", "0.1,0.3", "gaussian sigmas"},
      {"sweep-source-class", "any", "source class for sweep poisons"},
      {"sweep-target-class", "random", "target class for sweep poisons"},
      // adversarial attacks
      {"model", "out/model_seed1.mlsb", "model file attacked by 'attack'"},
      {"method", "fgsm", "attack method: fgsm | min-norm"},
      {"epsilon", "0.007", "FGSM step size in [0,1] pixel units"},
      {"fgsm-mode", "sign", "FGSM form: sign | raw"},
      {"clamp", "true", "clamp adversarial images to [0,1]"},
      {"target", "second", "min-norm target: second | none | class index"},
      {"samples", "100", "test images attacked"},
      {"c-lo", "0.001", "smallest penalty weight"},
      {"c-hi", "100", "largest penalty weight"},
      {"bisection-steps", "10", "penalty bisection steps"},
      {"lbfgs-iterations", "200", "L-BFGS iteration cap per solve"},
      {"lbfgs-history", "10", "L-BFGS memory"},
      {"lbfgs-tolerance", "1e-6", "projected-gradient stopping tolerance"},
  };
  return keys;
}

ConfigMap default_config() {
  ConfigMap out;
  for (const auto& k : config_keys()) out.set(k.name, k.default_value);
  return out;
}

ConfigMap resolve_config(const ConfigMap& overrides) {
  ConfigMap out = default_config();
  for (const auto& [k, v] : overrides.entries()) {
    if (!out.has(k)) throw ConfigError("unknown config key '" + k + "'");
    out.set(k, v);
  }
  return out;
}

}  // namespace mlsb
