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

// Plain-text run configuration: one `key = value` per line, `#` starts a
// comment, flat namespace. Every key has a documented default (see
// default_config()); unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mlsb/digest.hpp"

namespace mlsb {

class ConfigMap {
 public:
  static ConfigMap parse(std::string_view text);
  static ConfigMap load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const { return values_; }

  // Typed accessors; failures name the key.
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<std::uint64_t> get_uint_list(const std::string& key) const;

  // Keys sorted, one "key = value" line each. The digest hashes this text.
  std::string canonical_text() const;
  Digest digest() const;

 private:
  std::map<std::string, std::string> values_;
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

// Every recognised key with its default, in documentation order.
const std::vector<ConfigKey>& config_keys();

ConfigMap default_config();

// Defaults overlaid with the entries of `overrides`; unknown keys throw
// ConfigError.
ConfigMap resolve_config(const ConfigMap& overrides);

}  // namespace mlsb
