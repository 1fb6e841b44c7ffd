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

// Early attentive sparsification: attention-derived token importance,
// cross-layer aggregation and top-k time-domain token selection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eas/error.hpp"
#include "eas/random.hpp"
#include "eas/tensor.hpp"

namespace eas {

enum class Aggregation { Mean, Max, Min, GeometricMean, Random };

inline const char* to_string(Aggregation a) {
  switch (a) {
    case Aggregation::Mean: return "mean";
    case Aggregation::Max: return "max";
    case Aggregation::Min: return "min";
    case Aggregation::GeometricMean: return "geometric_mean";
    case Aggregation::Random: return "random";
  }
  return "mean";
}

inline Aggregation parse_aggregation(std::string_view name) {
  for (auto a : {Aggregation::Mean, Aggregation::Max, Aggregation::Min, Aggregation::GeometricMean,
                 Aggregation::Random}) {
    if (name == to_string(a)) return a;
  }
  fail(ErrorKind::Config, "unknown aggregation '" + std::string(name) +
                              "' (expected mean, max, min, geometric_mean or random)");
}

/// One point of the search space. `stage` is 1-based: the gather runs on the
/// output of encoder layer `stage`, using that layer's own attention.
struct EasConfig {
  int stage = 1;
  double sparsity = 0.0;
  Aggregation aggregation = Aggregation::Mean;
  bool cross_layer = false;  // aggregate importance over every layer, drop after the last
  std::uint64_t rng_seed = 0;

  void validate(int n_encoder_layers) const {
    if (stage < 1 || stage > n_encoder_layers) {
      fail(ErrorKind::Config, "stage " + std::to_string(stage) + " outside [1," +
                                  std::to_string(n_encoder_layers) + "]");
    }
    if (!(sparsity >= 0.0 && sparsity < 1.0)) {
      fail(ErrorKind::Config, "sparsity " + std::to_string(sparsity) + " outside [0,1)");
    }
    if (cross_layer && stage != n_encoder_layers) {
      fail(ErrorKind::Config, "cross-layer aggregation drops at the last layer; stage must be " +
                                  std::to_string(n_encoder_layers));
    }
  }
};

using ImportanceVector = std::vector<float>;

inline constexpr double kAttentionRowTolerance = 1e-5;
inline constexpr double kGeometricMeanFloor = 1e-12;

/// Mean post-softmax attention received by each key position:
/// I[t] = 1/(H*T) * sum over heads h and queries t' of attn[h, t', t].
/// Rows of `attn` must each sum to 1 within kAttentionRowTolerance.
inline ImportanceVector importance_mean(const Tensor& attn) {
  require_rank(attn, 3, "importance_mean");
  const std::size_t heads = attn.dim(0), t = attn.dim(2);
  if (attn.dim(1) != t) fail(ErrorKind::Dimension, "attention must be square per head");
  std::vector<double> acc(t, 0.0);
  for (std::size_t r = 0; r < heads * t; ++r) {
    auto row = attn.row(r);
    double row_sum = 0.0;
    for (std::size_t j = 0; j < t; ++j) {
      acc[j] += row[j];
      row_sum += row[j];
    }
    if (std::abs(row_sum - 1.0) > kAttentionRowTolerance) {
      fail(ErrorKind::Precondition, "attention row " + std::to_string(r) + " sums to " +
                                        std::to_string(row_sum) + ", expected post-softmax input");
    }
  }
  const double scale = 1.0 / static_cast<double>(heads * t);
  ImportanceVector out(t);
  for (std::size_t j = 0; j < t; ++j) out[j] = static_cast<float>(acc[j] * scale);
  return out;
}

/// Uniform-random pseudo importance; depends only on (length, seed).
inline ImportanceVector random_importance(std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  ImportanceVector out(length);
  for (auto& v : out) v = static_cast<float>(rng.uniform());
  return out;
}

/// Element-wise statistic across per-layer importance vectors.
inline ImportanceVector aggregate_cross_layer(std::span<const ImportanceVector> per_layer, Aggregation fn,
                                              std::uint64_t seed = 0) {
  if (per_layer.empty()) fail(ErrorKind::Argument, "aggregate_cross_layer needs at least one layer");
  const std::size_t t = per_layer.front().size();
  for (const auto& v : per_layer) {
    if (v.size() != t) fail(ErrorKind::Dimension, "importance vectors differ in length");
  }
  if (fn == Aggregation::Random) return random_importance(t, seed);

  const double n = static_cast<double>(per_layer.size());
  ImportanceVector out(t);
  for (std::size_t j = 0; j < t; ++j) {
    switch (fn) {
      case Aggregation::Mean: {
        double s = 0.0;
        for (const auto& v : per_layer) s += v[j];
        out[j] = static_cast<float>(s / n);
        break;
      }
      case Aggregation::Max: {
        float m = per_layer.front()[j];
        for (const auto& v : per_layer) m = std::max(m, v[j]);
        out[j] = m;
        break;
      }
      case Aggregation::Min: {
        float m = per_layer.front()[j];
        for (const auto& v : per_layer) m = std::min(m, v[j]);
        out[j] = m;
        break;
      }
      case Aggregation::GeometricMean: {
        double s = 0.0;
        for (const auto& v : per_layer) s += std::log(std::max<double>(v[j], kGeometricMeanFloor));
        out[j] = static_cast<float>(std::exp(s / n));
        break;
      }
      case Aggregation::Random: break;
    }
  }
  return out;
}

/// k = round_half_up((1 - s) * T), clamped to [1, T]. A 1e-9 slack makes
/// products that should be exact halves (but land a hair below in binary)
/// round up.
inline std::size_t keep_count(std::size_t length, double sparsity) {
  if (length < 1) fail(ErrorKind::Argument, "keep_count on empty sequence");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) {
    fail(ErrorKind::Argument, "sparsity " + std::to_string(sparsity) + " outside [0,1)");
  }
  const double raw = std::floor((1.0 - sparsity) * static_cast<double>(length) + 0.5 + 1e-9);
  const auto k = static_cast<std::size_t>(std::max(raw, 1.0));
  return std::min(k, length);
}

struct SparsifyResult {
  Tensor hidden;
  IndexList kept;
};

inline SparsifyResult sparsify(const Tensor& z, std::span<const float> importance, double sparsity) {
  require_rank(z, 2, "sparsify");
  if (importance.size() != z.dim(0)) {
    fail(ErrorKind::Dimension, "importance length " + std::to_string(importance.size()) +
                                   " vs sequence length " + std::to_string(z.dim(0)));
  }
  IndexList kept = topk_indices(importance, keep_count(z.dim(0), sparsity));
  Tensor hidden = gather_time(z, kept);
  return {std::move(hidden), std::move(kept)};
}

}  // namespace eas
