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

// Report emitters. JSON documents keep everything derived from the wall
// clock under a single "timing" key so reruns can be diffed with that one
// subtree removed. Text and CSV outputs are for people and plotting tools.

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "eas/metrics.hpp"
#include "eas/profiler.hpp"
#include "eas/search.hpp"
#include "json.hpp"

namespace eas {

inline constexpr int kReportSchemaVersion = 1;

inline nlohmann::json config_json(const std::optional<EasConfig>& c) {
  if (!c) return nullptr;
  return {{"stage", c->stage},
          {"sparsity", c->sparsity},
          {"aggregation", to_string(c->aggregation)},
          {"cross_layer", c->cross_layer},
          {"rng_seed", c->rng_seed}};
}

/// Fields that do not depend on the clock.
inline nlohmann::json record_json(const EvalRecord& r) {
  return {{"label", r.label()},
          {"baseline", r.is_baseline()},
          {"config", config_json(r.config)},
          {"wer", r.wer},
          {"errors", r.errors},
          {"reference_words", r.reference_words},
          {"accuracy_ratio", r.accuracy_ratio},
          {"avg_generated_tokens", r.avg_generated_tokens},
          {"cap_hit_fraction", r.cap_hit_fraction},
          {"audio_seconds", r.audio_seconds},
          {"n_examples", r.n_examples},
          {"failed_examples", r.failed_examples},
          {"failures", r.failures}};
}

inline nlohmann::json record_timing_json(const EvalRecord& r) {
  return {{"label", r.label()},
          {"rtf", r.rtf},
          {"speedup", r.speedup},
          {"inference_seconds", r.inference_seconds},
          {"component_seconds",
           {{"stem", r.component_seconds.stem},
            {"encoder", r.component_seconds.encoder},
            {"decoder", r.component_seconds.decoder}}}};
}

inline nlohmann::json run_report_json(const EvalRecord& r) {
  auto j = record_json(r);
  j["kind"] = "run";
  j["schema_version"] = kReportSchemaVersion;
  j["timing"] = record_timing_json(r);
  return j;
}

namespace detail {

inline nlohmann::json labels(const std::vector<EvalRecord>& rs) {
  auto a = nlohmann::json::array();
  for (const auto& r : rs) a.push_back(r.label());
  return a;
}

inline bool contains_label(const std::vector<EvalRecord>& rs, const std::string& label) {
  for (const auto& r : rs) {
    if (r.label() == label) return true;
  }
  return false;
}

}  // namespace detail

/// Front, admissible set and top-3 follow from measured RTF, so they sit
/// inside "timing" next to the per-record clock readings.
inline nlohmann::json search_report_json(const ParetoReport& rep) {
  nlohmann::json j;
  j["kind"] = "search";
  j["schema_version"] = kReportSchemaVersion;
  j["accuracy_floor"] = kAccuracyFloor;
  j["max_admissible_wer"] = rep.max_admissible_wer;
  j["baseline"] = record_json(rep.baseline);
  j["records"] = nlohmann::json::array();
  for (const auto& r : rep.all_records) j["records"].push_back(record_json(r));
  j["flagged"] = detail::labels(rep.flagged);

  auto timing = nlohmann::json::object();
  timing["records"] = nlohmann::json::array();
  for (const auto& r : rep.all_records) timing["records"].push_back(record_timing_json(r));
  timing["front"] = detail::labels(rep.front);
  timing["admissible"] = detail::labels(rep.admissible);
  timing["top3"] = detail::labels(rep.top3);
  timing["no_admissible_configuration"] = rep.no_admissible_configuration;
  j["timing"] = std::move(timing);
  return j;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

/// Baseline row, then the top-3 rows with accuracy ratio and speedup in
/// parentheses. WER is printed in percent.
inline void write_table(std::ostream& out, const ParetoReport& rep) {
  auto row = [&](const std::string& cfg, const std::string& wer, const std::string& rtf) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s %-18s %s\n", cfg.c_str(), wer.c_str(), rtf.c_str());
    out << buf;
  };
  row("(i, s)", "WER [%]", "RTF");
  row("Baseline", detail::fixed(100.0 * rep.baseline.wer, 3), detail::fixed(rep.baseline.rtf, 3));
  for (const auto& r : rep.top3) {
    row(r.is_baseline() ? "Baseline" : r.label(),
        detail::fixed(100.0 * r.wer, 3) + " (" + detail::fixed(r.accuracy_ratio, 3) + ")",
        detail::fixed(r.rtf, 3) + " (" + detail::fixed(r.speedup, 3) + "x)");
  }
  if (rep.no_admissible_configuration) out << "no admissible configuration\n";
}

/// Scatter data for a WER-vs-RTF plot, one row per record.
inline void write_scatter_csv(std::ostream& out, const ParetoReport& rep) {
  out << "label,stage,sparsity,wer,rtf,accuracy_ratio,speedup,on_front,admissible,top3_rank,flagged\n";
  out.precision(9);
  for (const auto& r : rep.all_records) {
    const std::string label = r.label();
    int rank = 0;
    for (std::size_t i = 0; i < rep.top3.size(); ++i) {
      if (rep.top3[i].label() == label) rank = static_cast<int>(i) + 1;
    }
    out << '"' << label << "\"," << r.stage() << ',' << r.sparsity() << ',' << r.wer << ',' << r.rtf << ','
        << r.accuracy_ratio << ',' << r.speedup << ',' << detail::contains_label(rep.front, label) << ','
        << detail::contains_label(rep.admissible, label) << ',' << rank << ','
        << detail::contains_label(rep.flagged, label) << '\n';
  }
}

inline void write_stability_csv(std::ostream& out, const StabilityReport& rep) {
  out << "group_size,groups,mean,std\n";
  out.precision(12);
  for (const auto& r : rep.rows) out << r.group_size << ',' << r.groups << ',' << r.mean << ',' << r.std << '\n';
}

}  // namespace eas
