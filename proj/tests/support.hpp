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

// Seeded generators and slow reference implementations shared by the tests.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "eas/eas.hpp"

namespace eas::testing {

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = static_cast<float>(rng.uniform(lo, hi));
  return t;
}

/// [H,T,T] with every row a softmax of random logits.
inline Tensor random_attention(Rng& rng, std::size_t heads, std::size_t t, double spread = 3.0) {
  Tensor a = random_tensor(rng, {heads, t, t}, -spread, spread);
  for (std::size_t r = 0; r < heads * t; ++r) softmax_row_inplace(std::span<float>(a.data().data() + r * t, t));
  return a;
}

inline std::vector<double> matmul_oracle(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
  std::vector<double> out(m * p, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (std::size_t x = 0; x < k; ++x) s += double(a.at(i, x)) * double(b.at(x, j));
      out[i * p + j] = s;
    }
  return out;
}

inline std::vector<long double> softmax_oracle(const std::vector<float>& row) {
  long double mx = row[0];
  for (float v : row) mx = std::max<long double>(mx, v);
  std::vector<long double> out;
  long double sum = 0;
  for (float v : row) {
    out.push_back(std::exp(static_cast<long double>(v) - mx));
    sum += out.back();
  }
  for (auto& v : out) v /= sum;
  return out;
}

/// Full stable sort by (value desc, index asc), take k, sort ascending.
inline IndexList topk_oracle(const std::vector<float>& v, std::size_t k) {
  IndexList idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline std::vector<double> importance_oracle(const Tensor& attn) {
  const std::size_t h = attn.dim(0), t = attn.dim(1);
  std::vector<double> out(t, 0.0);
  for (std::size_t col = 0; col < t; ++col) {
    double s = 0.0;
    for (std::size_t head = 0; head < h; ++head)
      for (std::size_t row = 0; row < t; ++row) s += attn.at(head, row, col);
    out[col] = s / static_cast<double>(h * t);
  }
  return out;
}

/// Textbook full-matrix Levenshtein distance.
inline std::size_t edit_distance_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
  return d[a.size()][b.size()];
}

inline std::vector<std::string> random_words(Rng& rng, std::size_t max_len, std::size_t alphabet) {
  const auto n = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(max_len)));
  std::vector<std::string> w;
  for (std::size_t i = 0; i < n; ++i) {
    w.push_back("w" + std::to_string(rng.uniform_int(0, static_cast<std::int64_t>(alphabet) - 1)));
  }
  return w;
}

inline EvalRecord point(double wer, double rtf, int stage = 1, double sparsity = 0.5) {
  EvalRecord r;
  r.config = EasConfig{stage, sparsity};
  r.wer = wer;
  r.rtf = rtf;
  return r;
}

/// Indices (into `records`) that no other record beats in both coordinates.
inline std::vector<std::size_t> dominance_scan(const std::vector<EvalRecord>& records) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < records.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < records.size() && !dominated; ++j) {
      dominated = records[j].wer < records[i].wer && records[j].rtf < records[i].rtf;
    }
    if (!dominated) keep.push_back(i);
  }
  return keep;
}

/// Small tiny-preset model and matching examples, built once per process.
struct EchoFixture {
  ModelConfig cfg = preset_config("tiny");
  Model model = make_echo_model(cfg, 7);
  std::vector<TaskExample> data = make_echo_dataset(cfg, 12, 11);
};

inline const EchoFixture& echo_fixture() {
  static const EchoFixture f;
  return f;
}

}  // namespace eas::testing
