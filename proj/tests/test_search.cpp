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

#include <gtest/gtest.h>

#include <set>

#include "support.hpp"
#include "table_fixtures.hpp"

using namespace eas;
using namespace eas::testing;

namespace {

std::vector<std::pair<double, double>> coords(const std::vector<EvalRecord>& rs) {
  std::vector<std::pair<double, double>> v;
  for (const auto& r : rs) v.emplace_back(r.wer, r.rtf);
  return v;
}

std::vector<std::string> labels(const std::vector<EvalRecord>& rs) {
  std::vector<std::string> v;
  for (const auto& r : rs) v.push_back(r.label());
  return v;
}

}  // namespace

TEST(Grid, ParsesDefaultSpec) {
  const auto g = parse_grid("stages=1..L;sparsities=0.0:0.9:0.1", 4);
  EXPECT_EQ(g.stages, (std::vector<int>{1, 2, 3, 4}));
  ASSERT_EQ(g.sparsities.size(), 10u);
  EXPECT_EQ(g.sparsities[3], 0.3);
  EXPECT_EQ(g.sparsities[9], 0.9);
}

TEST(Grid, ListsAndDefaults) {
  const auto g = parse_grid("stages=3,1", 4);
  EXPECT_EQ(g.stages, (std::vector<int>{1, 3}));
  EXPECT_EQ(g.sparsities.size(), 10u);
  EXPECT_EQ(parse_grid("sparsities=0.5,0.1", 2).sparsities, (std::vector<double>{0.1, 0.5}));
}

TEST(Grid, RejectsBadSpecs) {
  EXPECT_THROW(parse_grid("stages=0..2", 4), Error);
  EXPECT_THROW(parse_grid("stages=1..5", 4), Error);
  EXPECT_THROW(parse_grid("sparsities=0.0:1.0:0.5", 4), Error);
  EXPECT_THROW(parse_grid("layers=1", 4), Error);
  EXPECT_THROW(parse_grid("stages=a", 4), Error);
  EXPECT_THROW(parse_grid("sparsities=0:0.5:0", 4), Error);
}

TEST(Pareto, HandCases) {
  EXPECT_EQ(pareto_front({point(1, 1)}).size(), 1u);
  const auto f = pareto_front({point(1, 3), point(2, 2), point(3, 1)});
  EXPECT_EQ(coords(f), (std::vector<std::pair<double, double>>{{3, 1}, {2, 2}, {1, 3}}));
  EXPECT_EQ(coords(pareto_front({point(1, 1), point(2, 2)})), (std::vector<std::pair<double, double>>{{1, 1}}));
}

TEST(Pareto, TiesAndDuplicatesStay) {
  // Same WER, higher RTF: not strictly beaten in WER, so it stays.
  EXPECT_EQ(pareto_front({point(1, 1), point(1, 2)}).size(), 2u);
  EXPECT_EQ(pareto_front({point(1, 1), point(2, 1)}).size(), 2u);
  EXPECT_EQ(pareto_front({point(1, 1), point(1, 1), point(2, 2)}).size(), 2u);
  EXPECT_FALSE(strictly_dominates(point(1, 1), point(1, 2)));
  EXPECT_FALSE(strictly_dominates(point(1, 1), point(2, 1)));
  EXPECT_FALSE(strictly_dominates(point(1, 1), point(1, 1)));
  EXPECT_TRUE(strictly_dominates(point(1, 1), point(2, 2)));
}

TEST(Pareto, MatchesDominanceScanOnRandomInstances) {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 200));
    std::vector<EvalRecord> rs;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values make ties frequent.
      rs.push_back(point(rng.uniform_int(0, 20) / 10.0, rng.uniform_int(1, 20) / 10.0, static_cast<int>(i % 8) + 1,
                         0.1 * static_cast<double>(i % 9)));
    }
    std::multiset<std::pair<double, double>> want, got;
    for (auto i : dominance_scan(rs)) want.emplace(rs[i].wer, rs[i].rtf);
    const auto front = pareto_front(rs);
    for (const auto& r : front) got.emplace(r.wer, r.rtf);
    ASSERT_EQ(got, want);
    EXPECT_TRUE(std::is_sorted(front.begin(), front.end(), rtf_order));
    // Every record off the front is strictly beaten by a front record.
    for (const auto& r : rs) {
      if (got.count({r.wer, r.rtf})) continue;
      EXPECT_TRUE(std::any_of(front.begin(), front.end(), [&](const EvalRecord& f) { return strictly_dominates(f, r); }));
    }
  }
}

TEST(Select, LargeTurboBlock) {
  const auto block = large_turbo_block();
  const auto rep = select_constrained(block.records());
  EXPECT_NEAR(rep.max_admissible_wer * 100, 2.654, 5e-4);
  EXPECT_EQ(labels(rep.top3), (std::vector<std::string>{"(2, 0.6)", "(3, 0.6)", "(6, 0.6)"}));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(rep.top3[i].accuracy_ratio, block.rows[i].printed_ratio, 1e-3);
    EXPECT_NEAR(rep.top3[i].speedup, block.rows[i].speedup, 1e-9);
  }
  EXPECT_FALSE(rep.no_admissible_configuration);
}

TEST(Select, TinyBlock) {
  const auto block = tiny_block();
  const auto rep = select_constrained(block.records());
  EXPECT_EQ(labels(rep.top3), (std::vector<std::string>{"(3, 0.7)", "(2, 0.6)", "(2, 0.5)"}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(rep.top3[i].accuracy_ratio, block.rows[i].printed_ratio, 1e-3);
  // (2, 0.5) beats the baseline in both coordinates.
  EXPECT_EQ(std::count_if(rep.front.begin(), rep.front.end(), [](const EvalRecord& r) { return r.is_baseline(); }), 0);
}

TEST(Select, RoundedRtfsWouldReorderTies) {
  // With table-rounded RTFs the first two tie at 0.031 and WER breaks the
  // tie the other way; unrounded values are what reproduce the ordering.
  auto recs = large_turbo_block().records();
  for (auto& r : recs) r.rtf = std::round(r.rtf * 1000) / 1000;
  const auto rep = select_constrained(recs);
  EXPECT_EQ(rep.top3.front().label(), "(3, 0.6)");
}

TEST(Select, NothingAdmissible) {
  EvalRecord base = point(0.10, 1.0);
  base.config.reset();
  const auto rep = select_constrained({point(0.5, 0.5), point(0.4, 0.6)}, base);
  EXPECT_EQ(rep.front.size(), 2u);
  EXPECT_TRUE(rep.admissible.empty());
  EXPECT_TRUE(rep.top3.empty());
  EXPECT_TRUE(rep.no_admissible_configuration);
}

TEST(Select, BaselineInRecordsIsAlwaysAdmissibleCandidate) {
  EvalRecord base = point(0.10, 1.0);
  base.config.reset();
  const auto rep = select_constrained({base, point(0.5, 0.5)}, base);
  ASSERT_EQ(rep.top3.size(), 1u);
  EXPECT_TRUE(rep.top3[0].is_baseline());
}

TEST(Select, BaselineOnly) {
  EvalRecord base = point(0.1, 0.5);
  base.config.reset();
  const auto rep = select_constrained({base});
  ASSERT_EQ(rep.top3.size(), 1u);
  EXPECT_TRUE(rep.top3[0].is_baseline());
}

TEST(Select, FirstPickHasLowestAdmissibleRtf) {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    EvalRecord base = point(rng.uniform(0, 0.3), 1.0);
    base.config.reset();
    std::vector<EvalRecord> rs{base};
    for (int i = 0; i < 30; ++i) rs.push_back(point(rng.uniform(0, 0.5), rng.uniform(0.2, 1.2), 1 + i % 4, 0.1 * (i % 9 + 1)));
    const auto rep = select_constrained(rs, base);
    ASSERT_FALSE(rep.top3.empty());
    for (const auto& r : rep.admissible) EXPECT_GE(r.rtf, rep.top3[0].rtf);
    for (const auto& r : rep.admissible) EXPECT_TRUE(meets_accuracy_floor(r.wer, base.wer));
  }
}

TEST(Select, FlaggedRecordsStayOutOfTheFront) {
  EvalRecord base = point(0.1, 1.0);
  base.config.reset();
  EvalRecord broken = point(0.0, 0.1);
  broken.failed_examples = 1;
  const auto rep = select_constrained({base, broken}, base);
  EXPECT_EQ(rep.flagged.size(), 1u);
  EXPECT_EQ(rep.all_records.size(), 2u);
  EXPECT_EQ(rep.top3.size(), 1u);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<CorrectnessPair> stream(const std::vector<std::pair<std::size_t, std::size_t>>& base_cand_errors,
                                    std::size_t words) {
  std::vector<CorrectnessPair> v;
  for (auto [b, c] : base_cand_errors) v.push_back({{b, words}, {c, words}});
  return v;
}

}  // namespace

TEST(Stability, ZeroVarianceAndHandPair) {
  const auto same = stability_analysis(stream({{0, 1}, {0, 1}, {0, 1}, {0, 1}}, 50), {2});
  ASSERT_EQ(same.rows.size(), 1u);
  EXPECT_EQ(same.rows[0].groups, 2u);
  EXPECT_EQ(same.rows[0].std, 0.0);
  // Groups of one: ratio 0.98 and 1.00.
  const auto pair = stability_analysis(stream({{0, 2}, {0, 0}}, 100), {1});
  EXPECT_DOUBLE_EQ(pair.rows[0].mean, 0.99);
  EXPECT_NEAR(pair.rows[0].std, 0.01, 1e-15);
}

TEST(Stability, GroupCountsSkipsAndWholeCorpus) {
  Rng rng(43);
  std::vector<CorrectnessPair> pairs;
  for (int i = 0; i < 300; ++i) {
    const auto words = static_cast<std::size_t>(rng.uniform_int(5, 20));
    pairs.push_back({{static_cast<std::size_t>(rng.uniform_int(0, 1)), words},
                     {static_cast<std::size_t>(rng.uniform_int(0, 2)), words}});
  }
  const auto rep = stability_analysis(pairs, {10, 50, 100, 300, 301});
  ASSERT_EQ(rep.rows.size(), 4u);
  EXPECT_EQ(rep.rows[0].groups, 30u);
  EXPECT_EQ(rep.rows[1].groups, 6u);
  EXPECT_EQ(rep.rows[2].groups, 3u);
  ASSERT_EQ(rep.warnings.size(), 1u);
  CorrectnessPair total;
  for (const auto& p : pairs) {
    total.baseline.errors += p.baseline.errors;
    total.baseline.reference_words += p.baseline.reference_words;
    total.candidate.errors += p.candidate.errors;
    total.candidate.reference_words += p.candidate.reference_words;
  }
  const double w0 = double(total.baseline.errors) / double(total.baseline.reference_words);
  const double w = double(total.candidate.errors) / double(total.candidate.reference_words);
  EXPECT_EQ(rep.rows[3].mean, accuracy_ratio(w, w0));
  EXPECT_EQ(rep.rows[3].std, 0.0);
}

TEST(Stability, ShuffleIsSeededAndKeepsWholeCorpusRatio) {
  std::vector<CorrectnessPair> pairs = stream({{0, 3}, {1, 0}, {0, 0}, {2, 2}, {0, 1}, {1, 1}}, 10);
  const auto a = stability_analysis(pairs, {2, 6}, 5);
  const auto b = stability_analysis(pairs, {2, 6}, 5);
  const auto plain = stability_analysis(pairs, {2, 6});
  EXPECT_EQ(a.rows[0].ratios, b.rows[0].ratios);
  EXPECT_DOUBLE_EQ(a.rows[1].mean, plain.rows[1].mean);
}

TEST(Stability, ChosenSizeIsSmallestWithinTolerance) {
  StabilityReport rep;
  rep.rows = {{10, 30, 0.99, 0.03, {}}, {50, 6, 0.99, 0.012, {}}, {100, 3, 0.99, 0.008, {}}, {150, 2, 0.99, 0.002, {}}};
  EXPECT_EQ(chosen_group_size(rep), 100u);
  rep.rows.pop_back();
  rep.rows.pop_back();
  EXPECT_FALSE(chosen_group_size(rep).has_value());
}

// ---------------------------------------------------------------------------

TEST(RunGrid, CountsAndDeduplicatesZeroSparsity) {
  const auto& fx = echo_fixture();
  std::vector<TaskExample> few(fx.data.begin(), fx.data.begin() + 2);
  const auto one = run_grid(few, fx.model, parse_grid("stages=1;sparsities=0.0", 4));
  ASSERT_EQ(one.records.size(), 1u);
  EXPECT_TRUE(one.records[0].is_baseline());

  const auto full = run_grid(few, fx.model, default_grid(4));
  ASSERT_EQ(full.records.size(), 37u);
  EXPECT_TRUE(full.records[0].is_baseline());
  for (std::size_t i = 1; i < full.records.size(); ++i) {
    EXPECT_GT(full.records[i].sparsity(), 0.0);
    EXPECT_GT(full.records[i].rtf, 0.0);
  }
}

TEST(RunGrid, RerunGivesIdenticalWers) {
  const auto& fx = echo_fixture();
  std::vector<TaskExample> few(fx.data.begin(), fx.data.begin() + 3);
  const auto grid = parse_grid("stages=1,3;sparsities=0.3,0.8", 4);
  const auto a = run_grid(few, fx.model, grid), b = run_grid(few, fx.model, grid);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].wer, b.records[i].wer);
    EXPECT_EQ(a.records[i].avg_generated_tokens, b.records[i].avg_generated_tokens);
  }
}

TEST(RunGrid, RejectsInvalidCrossLayerGridUpFront) {
  const auto& fx = echo_fixture();
  GridOptions opt;
  opt.cross_layer = true;
  EXPECT_THROW(run_grid(fx.data, fx.model, parse_grid("stages=1;sparsities=0.5", 4), opt), Error);
}

TEST(RunGrid, FlagsFailingExamples) {
  const auto& fx = echo_fixture();
  std::vector<TaskExample> few(fx.data.begin(), fx.data.begin() + 2);
  few[1].features = Tensor({10, fx.cfg.n_mel + 3});  // wrong width, inference throws
  const auto res = run_grid(few, fx.model, parse_grid("stages=1;sparsities=0.5", 4));
  ASSERT_EQ(res.records.size(), 2u);
  for (const auto& r : res.records) EXPECT_EQ(r.failed_examples, 1u);
}
