// Copyright 2026 The EAS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Settings shared by the command-line tools. A JSON file can supply any of
// them; command-line flags override what the file says.
//
//   {"model": "fx/model.eas", "manifest": "fx/manifest.jsonl",
//    "grid": "stages=1..L;sparsities=0.0:0.9:0.1", "repeats": 3, ...}

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "eas/error.hpp"
#include "eas/sparsifier.hpp"
#include "json.hpp"

namespace eas {

struct RunConfig {
  std::string model;
  std::string manifest;
  std::string grid = "stages=1..L;sparsities=0.0:0.9:0.1";
  std::optional<int> stage;
  std::optional<double> sparsity;
  std::string aggregation = "mean";
  bool cross_layer = false;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t repeats = 1;
  std::optional<std::size_t> max_new_tokens;
  std::vector<std::size_t> group_sizes{10, 50, 100, 150, 300};
  std::optional<std::uint64_t> shuffle_seed;
  bool require_admissible = false;

  /// The single configuration a `run` evaluates; empty means baseline. A
  /// cross-layer run without a stage drops after the last layer.
  std::optional<EasConfig> eas(int n_layers) const {
    if (!stage && !sparsity && !cross_layer) return std::nullopt;
    EasConfig c;
    c.stage = stage.value_or(cross_layer ? n_layers : 1);
    c.sparsity = sparsity.value_or(0.0);
    c.aggregation = parse_aggregation(aggregation);
    c.cross_layer = cross_layer;
    c.rng_seed = seed;
    c.validate(n_layers);
    return c;
  }
};

namespace detail {

template <class T>
T config_field(const nlohmann::json& j, const char* key, const std::string& source) {
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!j.at(key).is_number_unsigned()) {
      fail(ErrorKind::Config, source + ": field '" + key + "' must be a non-negative integer");
    }
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::Config, source + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j, const std::string& source = "config") {
  if (!j.is_object()) fail(ErrorKind::Config, source + ": expected a JSON object");
  RunConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "model") {
      c.model = detail::config_field<std::string>(j, "model", source);
    } else if (k == "manifest") {
      c.manifest = detail::config_field<std::string>(j, "manifest", source);
    } else if (k == "grid") {
      c.grid = detail::config_field<std::string>(j, "grid", source);
    } else if (k == "stage") {
      c.stage = detail::config_field<int>(j, "stage", source);
    } else if (k == "sparsity") {
      c.sparsity = detail::config_field<double>(j, "sparsity", source);
    } else if (k == "aggregation") {
      c.aggregation = detail::config_field<std::string>(j, "aggregation", source);
      (void)parse_aggregation(c.aggregation);
    } else if (k == "cross_layer") {
      c.cross_layer = detail::config_field<bool>(j, "cross_layer", source);
    } else if (k == "seed") {
      c.seed = detail::config_field<std::uint64_t>(j, "seed", source);
    } else if (k == "out") {
      c.out = detail::config_field<std::string>(j, "out", source);
    } else if (k == "repeats") {
      c.repeats = detail::config_field<std::size_t>(j, "repeats", source);
      if (c.repeats == 0) fail(ErrorKind::Config, source + ": field 'repeats' must be at least 1");
    } else if (k == "max_new_tokens") {
      c.max_new_tokens = detail::config_field<std::size_t>(j, "max_new_tokens", source);
    } else if (k == "group_sizes") {
      c.group_sizes = detail::config_field<std::vector<std::size_t>>(j, "group_sizes", source);
    } else if (k == "shuffle_seed") {
      c.shuffle_seed = detail::config_field<std::uint64_t>(j, "shuffle_seed", source);
    } else if (k == "require_admissible") {
      c.require_admissible = detail::config_field<bool>(j, "require_admissible", source);
    } else {
      fail(ErrorKind::Config, source + ": unknown field '" + k + "'");
    }
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Config, path + ": invalid JSON (" + e.what() + ")");
  }
  return parse_run_config(j, path);
}

}  // namespace eas
