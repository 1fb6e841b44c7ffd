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

// End-to-end transcription of task examples and untimed, parallel
// evaluation of one configuration.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "eas/dataset.hpp"
#include "eas/echo_task.hpp"
#include "eas/metrics.hpp"
#include "eas/model.hpp"
#include "eas/sparsifier.hpp"

namespace eas {

/// Untimed inference holds this shared; a timed repeat holds it exclusively,
/// so no other evaluation work runs in-process while a clock is running.
inline std::shared_mutex& compute_gate() {
  static std::shared_mutex gate;
  return gate;
}

inline constexpr std::size_t kMinDecodeCap = 32;
inline constexpr std::size_t kDecodeCapPerWord = 4;

/// Per-example token budget: 4x the reference length, at least 32, unless
/// overridden.
inline std::size_t decode_cap(std::size_t reference_words, std::optional<std::size_t> override_cap = {}) {
  if (override_cap) return *override_cap;
  return std::max(kMinDecodeCap, kDecodeCapPerWord * reference_words);
}

/// Worker count for untimed evaluation: EAS_THREADS if set, otherwise the
/// hardware concurrency.
inline std::size_t evaluation_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EAS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) fail(ErrorKind::Config, "EAS_THREADS must be a positive integer");
    n = static_cast<std::size_t>(v);
  }
  return n;
}

struct Transcription {
  std::vector<int> tokens;
  bool cap_hit = false;
  std::size_t encoder_length = 0;  // rows reaching the decoder
};

inline Transcription transcribe_unlocked(const TaskExample& example, const Model& model,
                                         const std::optional<EasConfig>& eas, std::size_t cap) {
  const EncoderTrace trace = encode(example.features, model, eas);
  DecodeResult decoded = greedy_decode(trace, model, cap);
  return {std::move(decoded.tokens), decoded.cap_hit, trace.hidden.dim(0)};
}

inline Transcription transcribe(const TaskExample& example, const Model& model, const std::optional<EasConfig>& eas,
                                std::optional<std::size_t> cap_override = {}) {
  std::shared_lock lock(compute_gate());
  const std::size_t cap = decode_cap(normalized_words(example.reference_text).size(), cap_override);
  return transcribe_unlocked(example, model, eas, cap);
}

struct ExampleOutcome {
  std::size_t errors = 0;
  std::size_t reference_words = 0;
  std::size_t generated_tokens = 0;
  bool cap_hit = false;
  ComponentSeconds seconds;  // zero when untimed
  double total_seconds = 0.0;
  std::string failure;  // non-empty when inference threw
};

inline ExampleOutcome score_transcription(const TaskExample& example, const Transcription& t) {
  ExampleOutcome o;
  const auto ref = normalized_words(example.reference_text);
  const auto hyp = normalized_words(detokenize(t.tokens));
  o.errors = edit_distance(ref, hyp);
  o.reference_words = ref.size();
  o.generated_tokens = t.tokens.size();
  o.cap_hit = t.cap_hit;
  return o;
}

struct EvalOptions {
  std::optional<std::size_t> max_new_tokens;
  std::size_t threads = 1;
};

/// Transcribes every example without timing. Examples fan out over
/// `threads` workers; outcomes are returned in dataset order.
inline std::vector<ExampleOutcome> evaluate_untimed(const std::vector<TaskExample>& dataset, const Model& model,
                                                    const std::optional<EasConfig>& eas,
                                                    const EvalOptions& options = {}) {
  std::vector<ExampleOutcome> outcomes(dataset.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < dataset.size(); i = next++) {
      try {
        outcomes[i] = score_transcription(dataset[i], transcribe(dataset[i], model, eas, options.max_new_tokens));
      } catch (const std::exception& e) {
        outcomes[i].failure = e.what();
        outcomes[i].reference_words = normalized_words(dataset[i].reference_text).size();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(1, dataset.size()));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return outcomes;
}

/// Folds per-example outcomes into a record. Failed examples count every
/// reference word as an error and are listed, never dropped.
inline EvalRecord summarize(const std::vector<TaskExample>& dataset, const std::vector<ExampleOutcome>& outcomes,
                            const std::optional<EasConfig>& eas) {
  EvalRecord r;
  r.config = eas;
  r.n_examples = dataset.size();
  CorpusWer corpus;
  std::size_t tokens = 0, caps = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    if (!o.failure.empty()) {
      ++r.failed_examples;
      r.failures.push_back(dataset[i].id + ": " + o.failure);
      corpus.add(o.reference_words, o.reference_words);
    } else {
      corpus.add(o.errors, o.reference_words);
    }
    tokens += o.generated_tokens;
    caps += o.cap_hit ? 1 : 0;
    r.component_seconds += o.seconds;
    r.inference_seconds += o.total_seconds;
    r.audio_seconds += dataset[i].duration_seconds;
  }
  r.errors = corpus.errors;
  r.reference_words = corpus.reference_words;
  r.wer = corpus.value();
  const double n = static_cast<double>(std::max<std::size_t>(1, outcomes.size()));
  r.avg_generated_tokens = static_cast<double>(tokens) / n;
  r.cap_hit_fraction = static_cast<double>(caps) / n;
  if (r.inference_seconds > 0.0) r.rtf = real_time_factor(r.inference_seconds, r.audio_seconds);
  return r;
}

}  // namespace eas
