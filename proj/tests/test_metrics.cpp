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

#include "support.hpp"

using namespace eas;
using namespace eas::testing;

namespace {
std::vector<std::string> w(const char* s) { return split_words(s); }
}  // namespace

TEST(Normalize, CaseApostrophesPunctuation) {
  EXPECT_EQ(normalize_text("  Hello, World!  It's   fine. "), "hello world its fine");
  EXPECT_EQ(normalize_text("Alpha-bravo"), "alpha bravo");
  EXPECT_EQ(normalize_text("..."), "");
}

TEST(Wer, HandCases) {
  EXPECT_EQ(wer(w("a b c"), w("a b c")), 0.0);
  EXPECT_DOUBLE_EQ(wer(w("a b c"), w("a c")), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(wer(w("a b"), w("x y z")), 1.5);
  EXPECT_EQ(wer({}, {}), 0.0);
  EXPECT_THROW(wer({}, w("a")), Error);
}

TEST(Wer, EditDistanceMatchesOracleAndIsAMetric) {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const auto a = random_words(rng, 12, 5), b = random_words(rng, 12, 5), c = random_words(rng, 12, 5);
    const auto ab = edit_distance(a, b);
    EXPECT_EQ(ab, edit_distance_oracle(a, b));
    EXPECT_EQ(ab, edit_distance(b, a));
    EXPECT_EQ(edit_distance(a, a), 0u);
    EXPECT_LE(edit_distance(a, c), ab + edit_distance(b, c));
  }
}

TEST(Wer, CorpusPoolsInsteadOfAveraging) {
  CorpusWer corpus;
  corpus.add(w("a"), w("b"));              // 1 error / 1 word
  corpus.add(w("a b c d e f g h i j"), w("a b c d e f g h i j"));  // 0 / 10
  EXPECT_DOUBLE_EQ(corpus.value(), 1.0 / 11.0);
  EXPECT_NE(corpus.value(), 0.5 * (1.0 + 0.0));
  CorpusWer empty;
  EXPECT_THROW(empty.value(), Error);
}

TEST(AccuracyRatio, TableValues) {
  EXPECT_EQ(accuracy_ratio(0.05, 0.05), 1.0);
  EXPECT_NEAR(accuracy_ratio(0.07050, 0.06266), 0.9916, 1e-4);
  EXPECT_NEAR(accuracy_ratio(0.02489, 0.01671), 0.9917, 1e-4);
  EXPECT_THROW(accuracy_ratio(0.5, 1.0), Error);
  EXPECT_NEAR(max_admissible_wer(0.01671), 0.026543, 1e-6);
}

TEST(AccuracyRatio, StrictlyDecreasingInWer) {
  double prev = accuracy_ratio(0.0, 0.1);
  for (int i = 1; i <= 100; ++i) {
    const double r = accuracy_ratio(0.02 * i, 0.1);
    EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(Rtf, ArithmeticAndSpeedup) {
  EXPECT_DOUBLE_EQ(real_time_factor(1.0, 20.0), 0.05);
  EXPECT_EQ(real_time_factor(3.0, 3.0), 1.0);
  EXPECT_THROW(real_time_factor(1.0, 0.0), Error);
  EXPECT_DOUBLE_EQ(relative_speedup(0.10, 0.05), 2.0);
  EXPECT_EQ(relative_speedup(0.2, 0.2), 1.0);
  EXPECT_NEAR(relative_speedup(0.049, 0.031), 1.581, 1e-3);
  EXPECT_THROW(relative_speedup(0.1, 0.0), Error);
  Rng rng(32);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(0.001, 2), b = rng.uniform(0.001, 2);
    EXPECT_NEAR(relative_speedup(a, b) * relative_speedup(b, a), 1.0, 1e-9);
  }
}

TEST(Summaries, FailuresCountAsErrors) {
  const auto& fx = echo_fixture();
  std::vector<TaskExample> data(fx.data.begin(), fx.data.begin() + 2);
  std::vector<ExampleOutcome> outcomes(2);
  outcomes[0] = {0, 5, 5, false, {}, 0.0, {}};
  outcomes[1].failure = "boom";
  outcomes[1].reference_words = 7;
  const auto r = summarize(data, outcomes, std::nullopt);
  EXPECT_EQ(r.failed_examples, 1u);
  EXPECT_EQ(r.errors, 7u);
  EXPECT_EQ(r.reference_words, 12u);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_NE(r.failures[0].find("boom"), std::string::npos);
}

TEST(Pipeline, ParallelUntimedMatchesSerial) {
  const auto& fx = echo_fixture();
  const EasConfig c{2, 0.6};
  const auto serial = evaluate_untimed(fx.data, fx.model, c, {std::nullopt, 1});
  const auto parallel = evaluate_untimed(fx.data, fx.model, c, {std::nullopt, 4});
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].errors, parallel[i].errors);
    EXPECT_EQ(serial[i].generated_tokens, parallel[i].generated_tokens);
  }
}

TEST(Pipeline, DecodeCapRule) {
  EXPECT_EQ(decode_cap(3), 32u);
  EXPECT_EQ(decode_cap(10), 40u);
  EXPECT_EQ(decode_cap(10, 5), 5u);
}
