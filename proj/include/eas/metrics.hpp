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

// Word error rate, accuracy ratio, real-time factor and relative speedup.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "eas/error.hpp"
#include "eas/sparsifier.hpp"

namespace eas {

/// Lowercase, drop apostrophes, turn other punctuation into spaces, collapse
/// whitespace.
inline std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (c == '\'') continue;
    if (std::isspace(c) || std::ispunct(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

inline std::vector<std::string> normalized_words(std::string_view text) { return split_words(normalize_text(text)); }

/// Word-level Levenshtein distance with unit costs.
inline std::size_t edit_distance(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

/// Single-utterance WER. Both empty gives 0; an empty reference with a
/// non-empty hypothesis is undefined and rejected.
inline double wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  if (ref.empty()) {
    if (hyp.empty()) return 0.0;
    fail(ErrorKind::Argument, "WER undefined for an empty reference");
  }
  return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

/// Corpus WER pools edit distance and reference length over all examples;
/// it is not the mean of per-example rates.
struct CorpusWer {
  std::size_t errors = 0;
  std::size_t reference_words = 0;

  void add(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
    errors += edit_distance(ref, hyp);
    reference_words += ref.size();
  }

  void add(std::size_t edit_errors, std::size_t ref_words) {
    errors += edit_errors;
    reference_words += ref_words;
  }

  double value() const {
    if (reference_words == 0) fail(ErrorKind::Argument, "corpus WER with zero reference words");
    return static_cast<double>(errors) / static_cast<double>(reference_words);
  }
};

inline constexpr double kAccuracyFloor = 0.99;

/// (1 - wer) / (1 - wer0).
inline double accuracy_ratio(double wer_value, double wer0) {
  if (!(wer0 < 1.0)) fail(ErrorKind::Precondition, "degenerate baseline: WER0 >= 1");
  return (1.0 - wer_value) / (1.0 - wer0);
}

/// 1 - WER >= 0.99 (1 - WER0), evaluated without dividing.
inline bool meets_accuracy_floor(double wer_value, double wer0, double floor = kAccuracyFloor) {
  return 1.0 - wer_value >= floor * (1.0 - wer0);
}

/// Largest WER still admissible against baseline wer0.
inline double max_admissible_wer(double wer0, double floor = kAccuracyFloor) { return 1.0 - floor * (1.0 - wer0); }

inline double real_time_factor(double inference_seconds, double audio_seconds) {
  if (!(audio_seconds > 0.0)) fail(ErrorKind::Argument, "real-time factor needs positive audio duration");
  return inference_seconds / audio_seconds;
}

inline double relative_speedup(double rtf0, double rtf) {
  if (!(rtf > 0.0)) fail(ErrorKind::Argument, "relative speedup needs a positive RTF");
  return rtf0 / rtf;
}

// ---------------------------------------------------------------------------

struct ComponentSeconds {
  double stem = 0.0;
  double encoder = 0.0;
  double decoder = 0.0;

  double sum() const { return stem + encoder + decoder; }
  ComponentSeconds& operator+=(const ComponentSeconds& o) {
    stem += o.stem;
    encoder += o.encoder;
    decoder += o.decoder;
    return *this;
  }
};

/// Outcome of evaluating one configuration over a dataset.
struct EvalRecord {
  std::optional<EasConfig> config;  // empty for the baseline
  double wer = 0.0;
  double rtf = 0.0;
  double accuracy_ratio = 1.0;
  double speedup = 1.0;
  std::size_t errors = 0;
  std::size_t reference_words = 0;
  double inference_seconds = 0.0;
  double audio_seconds = 0.0;
  ComponentSeconds component_seconds;  // totals over the dataset
  double avg_generated_tokens = 0.0;
  double cap_hit_fraction = 0.0;
  std::size_t n_examples = 0;
  std::size_t failed_examples = 0;
  std::vector<std::string> failures;

  bool is_baseline() const { return !config.has_value(); }
  int stage() const { return config ? config->stage : 0; }
  double sparsity() const { return config ? config->sparsity : 0.0; }

  std::string label() const {
    if (!config) return "baseline";
    std::ostringstream os;
    os << '(' << config->stage << ", " << config->sparsity << ')';
    return os.str();
  }
};

/// Fills accuracy_ratio and speedup relative to `baseline`.
inline void relate_to_baseline(EvalRecord& r, const EvalRecord& baseline) {
  r.accuracy_ratio = accuracy_ratio(r.wer, baseline.wer);
  r.speedup = r.rtf > 0.0 ? relative_speedup(baseline.rtf, r.rtf) : 0.0;
}

}  // namespace eas
