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

// Evaluation examples and the line-delimited JSON manifest that lists them.
//
// Each manifest line is an object:
//   {"id": "ex00000", "features": "features.eas#ex00000",
//    "duration_seconds": 2.4, "reference_text": "Alpha bravo."}
// `features` names an archive (relative to the manifest's directory) and an
// entry inside it, separated by '#'.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "eas/archive.hpp"
#include "eas/error.hpp"
#include "eas/tensor.hpp"
#include "json.hpp"

namespace eas {

struct TaskExample {
  std::string id;
  Tensor features;  // [T_mel, n_mel]
  double duration_seconds = 0.0;
  std::string reference_text;
};

struct ManifestRecord {
  std::string id;
  std::string features;  // "<archive path>#<entry>"
  double duration_seconds = 0.0;
  std::string reference_text;
};

inline nlohmann::json to_json(const ManifestRecord& r) {
  return nlohmann::json{{"id", r.id},
                        {"features", r.features},
                        {"duration_seconds", r.duration_seconds},
                        {"reference_text", r.reference_text}};
}

inline std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Data, "cannot open manifest '" + path + "'");
  std::vector<ManifestRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::Data, where + ": invalid JSON (" + e.what() + ")");
    }
    auto field = [&](const char* key) -> const nlohmann::json& {
      if (!j.is_object() || !j.contains(key)) fail(ErrorKind::Data, where + ": missing field '" + key + "'");
      return j.at(key);
    };
    ManifestRecord r;
    const auto& features = field("features");
    const auto& duration = field("duration_seconds");
    const auto& text = field("reference_text");
    if (!features.is_string()) fail(ErrorKind::Data, where + ": field 'features' must be a string");
    if (!duration.is_number()) fail(ErrorKind::Data, where + ": field 'duration_seconds' must be a number");
    if (!text.is_string()) fail(ErrorKind::Data, where + ": field 'reference_text' must be a string");
    r.features = features.get<std::string>();
    r.duration_seconds = duration.get<double>();
    r.reference_text = text.get<std::string>();
    r.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "line" + std::to_string(line_no);
    if (!(r.duration_seconds > 0.0)) fail(ErrorKind::Data, where + ": field 'duration_seconds' must be positive");
    if (r.features.find('#') == std::string::npos) {
      fail(ErrorKind::Data, where + ": field 'features' must look like <archive>#<entry>");
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Data, "cannot open '" + path + "' for writing");
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) fail(ErrorKind::Data, "failed writing '" + path + "'");
}

/// Loads every example a manifest lists, resolving feature archives
/// relative to the manifest's directory.
inline std::vector<TaskExample> load_dataset(const std::string& manifest_path) {
  const auto records = read_manifest(manifest_path);
  const auto base = std::filesystem::path(manifest_path).parent_path();
  std::map<std::string, TensorArchive> archives;
  std::vector<TaskExample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const auto hash = r.features.rfind('#');
    const std::string file = r.features.substr(0, hash);
    const std::string entry = r.features.substr(hash + 1);
    const std::string resolved = (base / file).string();
    auto it = archives.find(resolved);
    if (it == archives.end()) it = archives.emplace(resolved, TensorArchive::load(resolved)).first;
    if (!it->second.contains(entry)) {
      fail(ErrorKind::Data, manifest_path + ": example '" + r.id + "' references missing entry '" + entry +
                                "' in " + resolved);
    }
    const Tensor& features = it->second.get(entry);
    if (features.rank() != 2) fail(ErrorKind::Data, "features for '" + r.id + "' must be [frames, mel]");
    out.push_back({r.id, features, r.duration_seconds, r.reference_text});
  }
  if (out.empty()) fail(ErrorKind::Data, "manifest '" + manifest_path + "' lists no examples");
  return out;
}

}  // namespace eas
