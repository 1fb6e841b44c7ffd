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

// Wall-clock decomposition of one transcription into stem, encoder stack and
// decode loop, timed evaluation of a configuration, and token-growth sweeps.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "eas/pipeline.hpp"

namespace eas {

using Clock = std::chrono::steady_clock;

/// Raw per-repeat samples; nothing is averaged away.
struct ComponentTiming {
  std::vector<ComponentSeconds> samples;
  std::vector<double> totals;  // outer clock around all three sections

  std::size_t n_repeats() const noexcept { return samples.size(); }

  ComponentSeconds median() const;
  double median_total() const;
};

/// Median with the usual mean-of-middle-pair for even counts.
inline double median_of(std::vector<double> v) {
  if (v.empty()) fail(ErrorKind::Argument, "median of an empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Linear-interpolated quantile, q in [0,1].
inline double quantile_of(std::vector<double> v, double q) {
  if (v.empty()) fail(ErrorKind::Argument, "quantile of an empty sample");
  if (q < 0.0 || q > 1.0) fail(ErrorKind::Argument, "quantile outside [0,1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline ComponentSeconds ComponentTiming::median() const {
  std::vector<double> s, e, d;
  for (const auto& c : samples) {
    s.push_back(c.stem);
    e.push_back(c.encoder);
    d.push_back(c.decoder);
  }
  return {median_of(s), median_of(e), median_of(d)};
}

inline double ComponentTiming::median_total() const { return median_of(totals); }

namespace detail {

inline double seconds_between(Clock::time_point a, Clock::time_point b) {
  if (b < a) fail(ErrorKind::Measurement, "monotonic clock went backwards");
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace detail

/// Cost of one empty timed section (a pair of clock reads), taken as the
/// 99th percentile over `trials` so a rare preemption does not dominate.
inline double section_overhead_seconds(std::size_t trials = 2000) {
  std::vector<double> v;
  v.reserve(trials);
  for (std::size_t i = 0; i < trials; ++i) {
    const auto a = Clock::now();
    const auto b = Clock::now();
    v.push_back(detail::seconds_between(a, b));
  }
  return quantile_of(std::move(v), 0.99);
}

inline constexpr std::size_t kTimedSections = 3;

/// Bound on |total - (stem + encoder + decoder)| for one repeat.
inline double additivity_bound_seconds(double overhead) { return overhead * static_cast<double>(kTimedSections + 1); }

struct TimedTranscription {
  Transcription result;
  ComponentTiming timing;
};

/// Times one example `n_repeats` times after an optional untimed warm-up.
/// Holds the compute gate exclusively for the duration so nothing else in
/// the process computes while a clock runs. Every repeat must produce the
/// same tokens.
inline TimedTranscription timed_transcribe(const TaskExample& example, const Model& model,
                                           const std::optional<EasConfig>& eas, std::size_t n_repeats,
                                           std::optional<std::size_t> cap_override = {}, bool warm_up = true) {
  if (n_repeats == 0) fail(ErrorKind::Argument, "n_repeats must be at least 1");
  const std::size_t cap = decode_cap(normalized_words(example.reference_text).size(), cap_override);
  std::unique_lock lock(compute_gate());
  if (warm_up) (void)transcribe_unlocked(example, model, eas, cap);

  TimedTranscription out;
  for (std::size_t r = 0; r < n_repeats; ++r) {
    const auto begin = Clock::now();
    const auto t0 = Clock::now();
    Tensor z = run_stem(example.features, model);
    const auto t1 = Clock::now();
    EncoderTrace trace = run_encoder_stack(std::move(z), model, eas);
    const auto t2 = Clock::now();
    DecodeResult decoded = greedy_decode(trace, model, cap);
    const auto t3 = Clock::now();
    const auto end = Clock::now();

    out.timing.samples.push_back(
        {detail::seconds_between(t0, t1), detail::seconds_between(t1, t2), detail::seconds_between(t2, t3)});
    out.timing.totals.push_back(detail::seconds_between(begin, end));
    Transcription t{std::move(decoded.tokens), decoded.cap_hit, trace.hidden.dim(0)};
    if (r == 0) {
      out.result = std::move(t);
    } else if (t.tokens != out.result.tokens || t.cap_hit != out.result.cap_hit) {
      fail(ErrorKind::Measurement, "repeat " + std::to_string(r) + " of '" + example.id + "' changed the output");
    }
  }
  return out;
}

/// One evaluated configuration with its per-repeat timings kept.
struct TimedEvaluation {
  EvalRecord record;
  std::vector<ComponentTiming> per_example;  // empty timing for failed examples
  std::vector<ExampleOutcome> outcomes;
};

/// Runs every example through timed_transcribe, one at a time. Per-example
/// times are medians over repeats; RTF is their sum over total audio.
/// Only the first example gets a warm-up pass.
inline TimedEvaluation evaluate_timed(const std::vector<TaskExample>& dataset, const Model& model,
                                      const std::optional<EasConfig>& eas, std::size_t n_repeats,
                                      std::optional<std::size_t> cap_override = {}) {
  if (dataset.empty()) fail(ErrorKind::Argument, "empty dataset");
  TimedEvaluation ev;
  ev.per_example.resize(dataset.size());
  ev.outcomes.resize(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    try {
      auto timed = timed_transcribe(dataset[i], model, eas, n_repeats, cap_override, i == 0);
      auto& o = ev.outcomes[i];
      o = score_transcription(dataset[i], timed.result);
      o.seconds = timed.timing.median();
      o.total_seconds = timed.timing.median_total();
      ev.per_example[i] = std::move(timed.timing);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Measurement) throw;
      ev.outcomes[i].failure = e.what();
      ev.outcomes[i].reference_words = normalized_words(dataset[i].reference_text).size();
    } catch (const std::exception& e) {
      ev.outcomes[i].failure = e.what();
      ev.outcomes[i].reference_words = normalized_words(dataset[i].reference_text).size();
    }
  }
  ev.record = summarize(dataset, ev.outcomes, eas);
  return ev;
}

// ---------------------------------------------------------------------------
// Timing CSV: one row per (config, repeat). Times are per-example averages
// for that repeat; tokens is the mean generated count and cap_hit the
// fraction of examples that hit the decode cap.

struct TimingRow {
  std::string config;
  std::size_t repeat = 0;
  ComponentSeconds seconds;
  double tokens = 0.0;
  double cap_hit = 0.0;
};

inline std::vector<TimingRow> timing_rows(const TimedEvaluation& ev) {
  std::size_t repeats = 0;
  for (const auto& t : ev.per_example) repeats = std::max(repeats, t.n_repeats());
  std::vector<TimingRow> rows;
  for (std::size_t r = 0; r < repeats; ++r) {
    TimingRow row{ev.record.label(), r, {}, ev.record.avg_generated_tokens, ev.record.cap_hit_fraction};
    std::size_t n = 0;
    for (const auto& t : ev.per_example) {
      if (r >= t.n_repeats()) continue;
      row.seconds += t.samples[r];
      ++n;
    }
    if (n > 0) {
      const double k = static_cast<double>(n);
      row.seconds = {row.seconds.stem / k, row.seconds.encoder / k, row.seconds.decoder / k};
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_timing_csv(std::ostream& out, const std::vector<TimingRow>& rows) {
  out << "config,repeat,stem_s,encoder_s,decoder_s,tokens,cap_hit\n";
  out.precision(9);
  for (const auto& r : rows) {
    out << '"' << r.config << "\"," << r.repeat << ',' << r.seconds.stem << ',' << r.seconds.encoder << ','
        << r.seconds.decoder << ',' << r.tokens << ',' << r.cap_hit << '\n';
  }
}

// ---------------------------------------------------------------------------
// Token growth: how many tokens the decoder emits as sparsity rises.

struct TokenGrowthPoint {
  double sparsity = 0.0;
  double avg_tokens = 0.0;
  double cap_hit_fraction = 0.0;
};

struct TokenGrowthCurve {
  int stage = 1;
  double baseline_avg_tokens = 0.0;
  double baseline_cap_hit_fraction = 0.0;
  std::vector<TokenGrowthPoint> points;
};

inline TokenGrowthCurve token_growth_curve(const std::vector<TaskExample>& dataset, const Model& model, EasConfig eas,
                                           const std::vector<double>& sparsities, const EvalOptions& options = {}) {
  if (!std::is_sorted(sparsities.begin(), sparsities.end())) fail(ErrorKind::Argument, "sparsities must be ordered");
  TokenGrowthCurve curve;
  curve.stage = eas.stage;
  const EvalRecord base = summarize(dataset, evaluate_untimed(dataset, model, std::nullopt, options), std::nullopt);
  curve.baseline_avg_tokens = base.avg_generated_tokens;
  curve.baseline_cap_hit_fraction = base.cap_hit_fraction;
  for (double s : sparsities) {
    eas.sparsity = s;
    const EvalRecord r = summarize(dataset, evaluate_untimed(dataset, model, eas, options), eas);
    curve.points.push_back({s, r.avg_generated_tokens, r.cap_hit_fraction});
  }
  return curve;
}

inline void write_token_growth_csv(std::ostream& out, const TokenGrowthCurve& curve) {
  out << "stage,sparsity,avg_tokens,cap_hit_fraction,baseline_avg_tokens\n";
  out.precision(9);
  for (const auto& p : curve.points) {
    out << curve.stage << ',' << p.sparsity << ',' << p.avg_tokens << ',' << p.cap_hit_fraction << ','
        << curve.baseline_avg_tokens << '\n';
  }
}

}  // namespace eas
