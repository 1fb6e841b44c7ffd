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

// Grid search over (stage, sparsity), Pareto extraction, the constrained
// top-3 selection and the dataset-size stability analysis.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "eas/metrics.hpp"
#include "eas/profiler.hpp"
#include "eas/random.hpp"

namespace eas {

struct SearchGrid {
  std::vector<int> stages;
  std::vector<double> sparsities{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  void validate(int n_layers) const {
    if (stages.empty()) fail(ErrorKind::Config, "grid: stages must not be empty");
    if (sparsities.empty()) fail(ErrorKind::Config, "grid: sparsities must not be empty");
    for (int st : stages) {
      if (st < 1 || st > n_layers) {
        fail(ErrorKind::Config, "grid: stage " + std::to_string(st) + " outside [1," + std::to_string(n_layers) + "]");
      }
    }
    for (double s : sparsities) {
      if (!(s >= 0.0 && s < 1.0)) fail(ErrorKind::Config, "grid: sparsity " + std::to_string(s) + " outside [0,1)");
    }
  }
};

inline SearchGrid default_grid(int n_layers) {
  SearchGrid g;
  for (int i = 1; i <= n_layers; ++i) g.stages.push_back(i);
  return g;
}

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string::npos) return parts;
    start = pos + 1;
  }
}

inline double parse_number(const std::string& text, const std::string& field) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) fail(ErrorKind::Config, "grid: bad number '" + text + "' in " + field);
  return v;
}

inline int parse_stage(const std::string& text, int n_layers) {
  if (text == "L") return n_layers;
  const double v = parse_number(text, "stages");
  if (v != std::floor(v)) fail(ErrorKind::Config, "grid: stage '" + text + "' is not an integer");
  return static_cast<int>(v);
}

}  // namespace detail

/// Parses "stages=1..L;sparsities=0.0:0.9:0.1". Stages accept a range a..b
/// or a comma list, with L standing for the encoder depth. Sparsities accept
/// start:stop:step (inclusive, snapped to 1e-9) or a comma list. A missing
/// key keeps its default.
inline SearchGrid parse_grid(const std::string& text, int n_layers) {
  SearchGrid g = default_grid(n_layers);
  for (const auto& clause : detail::split(text, ';')) {
    if (clause.empty()) continue;
    const auto eq = clause.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Config, "grid: expected key=value, got '" + clause + "'");
    const std::string key = detail::trim(clause.substr(0, eq));
    const std::string value = detail::trim(clause.substr(eq + 1));
    if (key == "stages") {
      g.stages.clear();
      if (const auto dots = value.find(".."); dots != std::string::npos) {
        const int a = detail::parse_stage(detail::trim(value.substr(0, dots)), n_layers);
        const int b = detail::parse_stage(detail::trim(value.substr(dots + 2)), n_layers);
        if (b < a) fail(ErrorKind::Config, "grid: empty stage range '" + value + "'");
        for (int i = a; i <= b; ++i) g.stages.push_back(i);
      } else {
        for (const auto& p : detail::split(value, ',')) g.stages.push_back(detail::parse_stage(p, n_layers));
      }
    } else if (key == "sparsities") {
      g.sparsities.clear();
      const auto parts = detail::split(value, ':');
      if (parts.size() == 3) {
        const double a = detail::parse_number(parts[0], "sparsities");
        const double b = detail::parse_number(parts[1], "sparsities");
        const double step = detail::parse_number(parts[2], "sparsities");
        if (!(step > 0.0)) fail(ErrorKind::Config, "grid: sparsity step must be positive");
        for (std::size_t i = 0;; ++i) {
          const double s = std::round((a + static_cast<double>(i) * step) * 1e9) / 1e9;
          if (s > b + 1e-9) break;
          g.sparsities.push_back(s);
        }
      } else if (parts.size() == 1) {
        for (const auto& p : detail::split(value, ',')) g.sparsities.push_back(detail::parse_number(p, "sparsities"));
      } else {
        fail(ErrorKind::Config, "grid: sparsities must be start:stop:step or a comma list");
      }
    } else {
      fail(ErrorKind::Config, "grid: unknown key '" + key + "'");
    }
  }
  std::sort(g.stages.begin(), g.stages.end());
  g.stages.erase(std::unique(g.stages.begin(), g.stages.end()), g.stages.end());
  std::sort(g.sparsities.begin(), g.sparsities.end());
  g.sparsities.erase(std::unique(g.sparsities.begin(), g.sparsities.end()), g.sparsities.end());
  g.validate(n_layers);
  return g;
}

// ---------------------------------------------------------------------------
// Grid evaluation

struct GridOptions {
  std::size_t repeats = 1;
  std::optional<std::size_t> max_new_tokens;
  Aggregation aggregation = Aggregation::Mean;
  bool cross_layer = false;
  std::uint64_t seed = 0;
};

struct GridResult {
  std::vector<EvalRecord> records;  // baseline first, then by (stage, sparsity)
  std::vector<TimedEvaluation> evaluations;
};

/// Evaluates the baseline once and every grid point with s > 0. Sparsity 0
/// is the identity for every stage, so those points are folded into the
/// baseline record instead of being evaluated again. Runs are timed, so
/// they execute one after another.
inline GridResult run_grid(const std::vector<TaskExample>& dataset, const Model& model, const SearchGrid& grid,
                           const GridOptions& options = {}) {
  if (dataset.empty()) fail(ErrorKind::Argument, "run_grid needs a non-empty dataset");
  grid.validate(static_cast<int>(model.config.n_encoder_layers));
  std::vector<EasConfig> configs;
  for (int stage : grid.stages) {
    for (double s : grid.sparsities) {
      if (s == 0.0) continue;
      EasConfig c;
      c.stage = stage;
      c.sparsity = s;
      c.aggregation = options.aggregation;
      c.cross_layer = options.cross_layer;
      c.rng_seed = options.seed;
      c.validate(static_cast<int>(model.config.n_encoder_layers));
      configs.push_back(c);
    }
  }
  GridResult out;
  auto run = [&](const std::optional<EasConfig>& eas) {
    out.evaluations.push_back(evaluate_timed(dataset, model, eas, options.repeats, options.max_new_tokens));
    out.records.push_back(out.evaluations.back().record);
  };
  run(std::nullopt);
  for (const auto& c : configs) run(c);
  const EvalRecord baseline = out.records.front();
  for (auto& r : out.records) relate_to_baseline(r, baseline);
  for (std::size_t i = 0; i < out.records.size(); ++i) out.evaluations[i].record = out.records[i];
  return out;
}

// ---------------------------------------------------------------------------
// Pareto front

/// Ordering used for the front and for top-3: rtf, then wer, then grid
/// coordinates (the baseline counts as stage 0).
inline bool rtf_order(const EvalRecord& a, const EvalRecord& b) {
  if (a.rtf != b.rtf) return a.rtf < b.rtf;
  if (a.wer != b.wer) return a.wer < b.wer;
  if (a.stage() != b.stage()) return a.stage() < b.stage();
  return a.sparsity() < b.sparsity();
}

/// b strictly beats a in both coordinates.
inline bool strictly_dominates(const EvalRecord& b, const EvalRecord& a) { return b.wer < a.wer && b.rtf < a.rtf; }

/// Records that no other record beats strictly in both WER and RTF. Records
/// tied with a front point in either coordinate stay on the front. Sweeps
/// in rtf order, so O(n log n).
inline std::vector<EvalRecord> pareto_front(std::vector<EvalRecord> records) {
  std::stable_sort(records.begin(), records.end(), rtf_order);
  std::vector<EvalRecord> front;
  double best_wer_before = std::numeric_limits<double>::infinity();  // over strictly smaller rtf
  for (std::size_t i = 0; i < records.size();) {
    std::size_t j = i;
    double group_best = std::numeric_limits<double>::infinity();
    while (j < records.size() && records[j].rtf == records[i].rtf) {
      if (!(best_wer_before < records[j].wer)) front.push_back(records[j]);
      group_best = std::min(group_best, records[j].wer);
      ++j;
    }
    best_wer_before = std::min(best_wer_before, group_best);
    i = j;
  }
  return front;
}

struct ParetoReport {
  EvalRecord baseline;
  std::vector<EvalRecord> all_records;
  std::vector<EvalRecord> front;
  std::vector<EvalRecord> admissible;
  std::vector<EvalRecord> top3;
  std::vector<EvalRecord> flagged;  // had failed examples, kept out of the front
  double max_admissible_wer = 0.0;
  bool no_admissible_configuration = false;
};

/// Front, then the accuracy floor, then up to three by ascending rtf.
/// `baseline` is the reference for ratios and speedups; it competes for the
/// front only when it is one of `records` (run_grid always includes it).
inline ParetoReport select_constrained(std::vector<EvalRecord> records, const EvalRecord& baseline,
                                       double floor = kAccuracyFloor) {
  ParetoReport rep;
  rep.baseline = baseline;
  rep.baseline.config.reset();
  relate_to_baseline(rep.baseline, baseline);
  std::vector<EvalRecord> candidates;
  for (auto& r : records) {
    relate_to_baseline(r, baseline);
    if (r.failed_examples > 0) {
      rep.flagged.push_back(r);
    } else {
      candidates.push_back(r);
    }
  }
  rep.all_records = records;
  rep.max_admissible_wer = max_admissible_wer(baseline.wer, floor);
  rep.front = pareto_front(std::move(candidates));
  for (const auto& r : rep.front) {
    if (meets_accuracy_floor(r.wer, baseline.wer, floor)) rep.admissible.push_back(r);
  }
  rep.top3.assign(rep.admissible.begin(), rep.admissible.begin() + std::min<std::ptrdiff_t>(3, rep.admissible.size()));
  rep.no_admissible_configuration = rep.top3.empty();
  return rep;
}

inline ParetoReport select_constrained(const std::vector<EvalRecord>& records, double floor = kAccuracyFloor) {
  auto it = std::find_if(records.begin(), records.end(), [](const EvalRecord& r) { return r.is_baseline(); });
  if (it == records.end()) fail(ErrorKind::Precondition, "select_constrained needs a baseline record");
  return select_constrained(records, *it, floor);
}

// ---------------------------------------------------------------------------
// Stability analysis: how much the accuracy ratio of one configuration
// wobbles when the evaluation set is cut into groups of a given size.

struct Correctness {
  std::size_t errors = 0;
  std::size_t reference_words = 0;
};

struct CorrectnessPair {
  Correctness baseline;
  Correctness candidate;
};

struct StabilityRow {
  std::size_t group_size = 0;
  std::size_t groups = 0;
  double mean = 0.0;
  double std = 0.0;  // population
  std::vector<double> ratios;
};

struct StabilityReport {
  std::vector<StabilityRow> rows;
  std::vector<std::string> warnings;
};

inline std::vector<CorrectnessPair> correctness_pairs(const std::vector<ExampleOutcome>& baseline,
                                                      const std::vector<ExampleOutcome>& candidate) {
  if (baseline.size() != candidate.size()) fail(ErrorKind::Argument, "outcome lists differ in length");
  std::vector<CorrectnessPair> pairs;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    auto pick = [](const ExampleOutcome& o) {
      return Correctness{o.failure.empty() ? o.errors : o.reference_words, o.reference_words};
    };
    pairs.push_back({pick(baseline[i]), pick(candidate[i])});
  }
  return pairs;
}

/// For each size n: floor(total / n) disjoint contiguous groups (dataset
/// order, or a seeded shuffle), pooled WER per group on both sides, and the
/// mean and population std of the per-group accuracy ratio. Sizes larger
/// than the corpus are skipped with a warning.
inline StabilityReport stability_analysis(const std::vector<CorrectnessPair>& pairs,
                                          const std::vector<std::size_t>& group_sizes,
                                          std::optional<std::uint64_t> shuffle_seed = {}) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  }
  StabilityReport rep;
  for (std::size_t n : group_sizes) {
    if (n == 0) fail(ErrorKind::Argument, "group size must be positive");
    if (n > pairs.size()) {
      rep.warnings.push_back("group size " + std::to_string(n) + " exceeds " + std::to_string(pairs.size()) +
                             " examples; skipped");
      continue;
    }
    StabilityRow row;
    row.group_size = n;
    row.groups = pairs.size() / n;
    for (std::size_t g = 0; g < row.groups; ++g) {
      CorrectnessPair sum;
      for (std::size_t i = g * n; i < (g + 1) * n; ++i) {
        const auto& p = pairs[order[i]];
        sum.baseline.errors += p.baseline.errors;
        sum.baseline.reference_words += p.baseline.reference_words;
        sum.candidate.errors += p.candidate.errors;
        sum.candidate.reference_words += p.candidate.reference_words;
      }
      if (sum.baseline.reference_words == 0 || sum.candidate.reference_words == 0) {
        fail(ErrorKind::Data, "stability group with zero reference words");
      }
      const double w0 = static_cast<double>(sum.baseline.errors) / static_cast<double>(sum.baseline.reference_words);
      const double w =
          static_cast<double>(sum.candidate.errors) / static_cast<double>(sum.candidate.reference_words);
      row.ratios.push_back(accuracy_ratio(w, w0));
    }
    const double k = static_cast<double>(row.groups);
    row.mean = std::accumulate(row.ratios.begin(), row.ratios.end(), 0.0) / k;
    double ss = 0.0;
    for (double r : row.ratios) ss += (r - row.mean) * (r - row.mean);
    row.std = std::sqrt(ss / k);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

inline constexpr double kStabilityTolerance = 0.01;

/// Smallest analysed size whose std is within tolerance.
inline std::optional<std::size_t> chosen_group_size(const StabilityReport& rep, double tol = kStabilityTolerance) {
  std::optional<std::size_t> best;
  for (const auto& r : rep.rows) {
    if (r.std <= tol && (!best || r.group_size < *best)) best = r.group_size;
  }
  return best;
}

}  // namespace eas
