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

// Compact Whisper-style encoder-decoder. A convolutional stem shortens the
// feature sequence, a pre-norm transformer encoder builds the audio context,
// and a transformer decoder produces text tokens greedily.
//
// Only the layer chosen for sparsification materializes its post-softmax
// attention scores. Every other layer runs the score-free path. Both paths
// share the same arithmetic, so a layer's output does not depend on whether
// its scores were kept.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eas/error.hpp"
#include "eas/sparsifier.hpp"
#include "eas/tensor.hpp"

namespace eas {

struct StemLayer {
  std::size_t kernel = 3;
  std::size_t stride = 1;
};

struct ModelConfig {
  std::size_t n_mel = 80;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_encoder_layers = 4;
  std::size_t n_decoder_layers = 2;
  std::size_t vocab_size = 34;
  std::size_t ffn_dim = 256;
  std::size_t max_source_len = 128;  // encoder positions after the stem
  std::size_t max_target_len = 128;  // decoder positions, start token included
  std::size_t max_new_tokens = 96;   // hard ceiling on generated tokens
  std::vector<StemLayer> stem{{3, 1}, {3, 2}};
  int eot_token = 0;
  int sot_token = 1;

  std::size_t head_dim() const { return d_model / n_heads; }

  std::size_t stem_output_length(std::size_t frames) const {
    std::size_t t = frames;
    for (const auto& c : stem) t = conv1d_output_length(t, c.kernel, c.stride, c.kernel / 2);
    return t;
  }

  /// Largest feature length whose stem output fits in max_source_len.
  std::size_t max_feature_frames() const {
    std::size_t frames = max_source_len;
    for (const auto& c : stem) frames *= c.stride;
    while (frames > 0 && stem_output_length(frames) > max_source_len) --frames;
    return frames;
  }

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) fail(ErrorKind::Config, what);
    };
    need(d_model > 0 && n_heads > 0, "d_model and n_heads must be positive");
    need(d_model % n_heads == 0, "d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                                     std::to_string(n_heads));
    need(d_model % 2 == 0 && d_model >= 4, "d_model must be even and at least 4 for sinusoidal positions");
    need(n_encoder_layers >= 1, "need at least one encoder layer");
    need(n_decoder_layers >= 1, "need at least one decoder layer");
    need(n_mel >= 1 && ffn_dim >= 1, "n_mel and ffn_dim must be positive");
    need(max_new_tokens >= 1, "max_new_tokens must be at least 1");
    need(max_target_len >= 2, "max_target_len must leave room for one generated token");
    need(max_source_len >= 1, "max_source_len must be positive");
    need(!stem.empty(), "stem needs at least one convolution");
    for (const auto& c : stem) need(c.kernel >= 1 && c.stride >= 1, "stem kernels and strides must be positive");
    auto in_vocab = [&](int t) { return t >= 0 && static_cast<std::size_t>(t) < vocab_size; };
    need(in_vocab(eot_token) && in_vocab(sot_token) && eot_token != sot_token,
         "start and end tokens must be distinct vocabulary entries");
  }
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
};

struct AttentionWeights {
  Linear q, k, v, o;
};

struct ConvWeights {
  Tensor weight;  // [C_out, C_in, K]
  Tensor bias;    // [C_out]
};

struct EncoderLayerWeights {
  LayerNormParams attn_ln;
  AttentionWeights attn;
  LayerNormParams mlp_ln;
  Linear fc1, fc2;
};

struct DecoderLayerWeights {
  LayerNormParams self_ln;
  AttentionWeights self_attn;
  LayerNormParams cross_ln;
  AttentionWeights cross_attn;
  LayerNormParams mlp_ln;
  Linear fc1, fc2;
};

struct ModelWeights {
  std::vector<ConvWeights> stem;
  Tensor encoder_positions;  // [max_source_len, N], fixed sinusoids
  std::vector<EncoderLayerWeights> encoder;
  LayerNormParams encoder_ln;
  Tensor token_embedding;      // [V, N]
  Tensor decoder_positions;    // [max_target_len, N], learned table
  std::vector<DecoderLayerWeights> decoder;
  LayerNormParams decoder_ln;
  Tensor lm_head;  // [N, V]
};

/// Calls f(name, tensor) for every parameter, in a fixed order. Works on
/// const and mutable weights alike.
template <typename Weights, typename F>
void visit_tensors(Weights& w, F&& f) {
  auto lin = [&](const std::string& p, auto& l) {
    f(p + ".weight", l.weight);
    f(p + ".bias", l.bias);
  };
  auto ln = [&](const std::string& p, auto& n) {
    f(p + ".gamma", n.gamma);
    f(p + ".beta", n.beta);
  };
  auto attn = [&](const std::string& p, auto& a) {
    lin(p + ".q", a.q);
    lin(p + ".k", a.k);
    lin(p + ".v", a.v);
    lin(p + ".o", a.o);
  };
  for (std::size_t i = 0; i < w.stem.size(); ++i) {
    const std::string p = "encoder.stem." + std::to_string(i);
    f(p + ".weight", w.stem[i].weight);
    f(p + ".bias", w.stem[i].bias);
  }
  f(std::string("encoder.positions"), w.encoder_positions);
  for (std::size_t i = 0; i < w.encoder.size(); ++i) {
    const std::string p = "encoder.layers." + std::to_string(i);
    auto& l = w.encoder[i];
    ln(p + ".attn_ln", l.attn_ln);
    attn(p + ".attn", l.attn);
    ln(p + ".mlp_ln", l.mlp_ln);
    lin(p + ".fc1", l.fc1);
    lin(p + ".fc2", l.fc2);
  }
  ln("encoder.ln_post", w.encoder_ln);
  f(std::string("decoder.token_embedding"), w.token_embedding);
  f(std::string("decoder.positions"), w.decoder_positions);
  for (std::size_t i = 0; i < w.decoder.size(); ++i) {
    const std::string p = "decoder.layers." + std::to_string(i);
    auto& l = w.decoder[i];
    ln(p + ".self_ln", l.self_ln);
    attn(p + ".self_attn", l.self_attn);
    ln(p + ".cross_ln", l.cross_ln);
    attn(p + ".cross_attn", l.cross_attn);
    ln(p + ".mlp_ln", l.mlp_ln);
    lin(p + ".fc1", l.fc1);
    lin(p + ".fc2", l.fc2);
  }
  ln("decoder.ln", w.decoder_ln);
  f(std::string("decoder.lm_head"), w.lm_head);
}

/// Whisper's sinusoid table: first half sin, second half cos, timescales
/// geometric from 1 to 10000.
inline Tensor sinusoid_table(std::size_t length, std::size_t channels) {
  const std::size_t half = channels / 2;
  const double increment = std::log(10000.0) / static_cast<double>(half - 1);
  Tensor table({length, channels});
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; i < half; ++i) {
      const double angle = static_cast<double>(t) * std::exp(-increment * static_cast<double>(i));
      table.at(t, i) = static_cast<float>(std::sin(angle));
      table.at(t, half + i) = static_cast<float>(std::cos(angle));
    }
  }
  return table;
}

inline double sinusoid_frequency(std::size_t index, std::size_t channels) {
  const std::size_t half = channels / 2;
  return std::exp(-std::log(10000.0) / static_cast<double>(half - 1) * static_cast<double>(index));
}

/// Zero-filled weights with every shape implied by the config (LayerNorm
/// gains set to one, encoder positions filled with sinusoids).
inline ModelWeights allocate_weights(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.d_model;
  auto lin = [](std::size_t in, std::size_t out) { return Linear{Tensor({in, out}), Tensor({out})}; };
  auto ln = [n] { return LayerNormParams{Tensor({n}, 1.0f), Tensor({n})}; };
  auto attn = [&] { return AttentionWeights{lin(n, n), lin(n, n), lin(n, n), lin(n, n)}; };

  ModelWeights w;
  std::size_t c_in = cfg.n_mel;
  for (const auto& c : cfg.stem) {
    w.stem.push_back({Tensor({n, c_in, c.kernel}), Tensor({n})});
    c_in = n;
  }
  w.encoder_positions = sinusoid_table(cfg.max_source_len, n);
  for (std::size_t i = 0; i < cfg.n_encoder_layers; ++i) {
    w.encoder.push_back({ln(), attn(), ln(), lin(n, cfg.ffn_dim), lin(cfg.ffn_dim, n)});
  }
  w.encoder_ln = ln();
  w.token_embedding = Tensor({cfg.vocab_size, n});
  w.decoder_positions = Tensor({cfg.max_target_len, n});
  for (std::size_t i = 0; i < cfg.n_decoder_layers; ++i) {
    w.decoder.push_back({ln(), attn(), ln(), attn(), ln(), lin(n, cfg.ffn_dim), lin(cfg.ffn_dim, n)});
  }
  w.decoder_ln = ln();
  w.lm_head = Tensor({n, cfg.vocab_size});
  return w;
}

struct Model {
  ModelConfig config;
  ModelWeights weights;

  /// Shapes match the config and every value is finite.
  void validate() const {
    config.validate();
    const ModelWeights expected = allocate_weights(config);
    std::vector<std::pair<std::string, Shape>> want;
    visit_tensors(expected, [&](const std::string& name, const Tensor& t) { want.emplace_back(name, t.shape()); });
    std::size_t i = 0;
    visit_tensors(weights, [&](const std::string& name, const Tensor& t) {
      if (i >= want.size() || want[i].first != name) fail(ErrorKind::Config, "unexpected weight " + name);
      if (t.shape() != want[i].second) {
        fail(ErrorKind::Config, "weight " + name + " has shape " + shape_string(t.shape()) + ", expected " +
                                    shape_string(want[i].second));
      }
      if (!all_finite(t)) fail(ErrorKind::Data, "weight " + name + " contains non-finite values");
      ++i;
    });
    if (i != want.size()) fail(ErrorKind::Config, "weights are missing tensors");
  }
};

// ---------------------------------------------------------------------------
// Attention

/// Multi-head scaled dot-product attention over pre-projected q [Tq,N],
/// k [Tk,N], v [Tk,N]. When `scores` is non-null it receives the
/// post-softmax weights as [H,Tq,Tk].
inline Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t n_heads,
                                   Tensor* scores = nullptr) {
  const std::size_t tq = q.dim(0), tk = k.dim(0), n = q.dim(1);
  if (k.dim(1) != n || v.dim(1) != n || v.dim(0) != tk) fail(ErrorKind::Dimension, "attention q/k/v mismatch");
  const std::size_t dh = n / n_heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  if (scores) *scores = Tensor({n_heads, tq, tk});

  Tensor out({tq, n});
  std::vector<float> kt(dh * tk);
  std::vector<float> row(tk);
  std::vector<float> acc(dh);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t j = 0; j < tk; ++j)
      for (std::size_t d = 0; d < dh; ++d) kt[d * tk + j] = k.at(j, off + d);

    for (std::size_t i = 0; i < tq; ++i) {
      std::fill(row.begin(), row.end(), 0.0f);
      for (std::size_t d = 0; d < dh; ++d) {
        const float qd = q.at(i, off + d);
        const float* kr = kt.data() + d * tk;
        for (std::size_t j = 0; j < tk; ++j) row[j] += qd * kr[j];
      }
      for (float& s : row) s *= scale;
      softmax_row_inplace(row);
      if (scores) std::copy(row.begin(), row.end(), &scores->at(h, i, 0));

      std::fill(acc.begin(), acc.end(), 0.0f);
      for (std::size_t j = 0; j < tk; ++j) {
        const float p = row[j];
        const float* vr = v.data().data() + j * n + off;
        for (std::size_t d = 0; d < dh; ++d) acc[d] += p * vr[d];
      }
      std::copy(acc.begin(), acc.end(), &out.at(i, off));
    }
  }
  return out;
}

struct EncoderLayerOutput {
  Tensor hidden;
  std::optional<Tensor> scores;  // [H,T,T], only when requested
};

/// Pre-norm self-attention block followed by a pre-norm GELU feed-forward.
inline EncoderLayerOutput encoder_layer_forward(const Tensor& z, const EncoderLayerWeights& layer,
                                                std::size_t n_heads, bool materialize_scores) {
  EncoderLayerOutput result;
  const Tensor h = layernorm(z, layer.attn_ln.gamma, layer.attn_ln.beta);
  const Tensor q = linear(h, layer.attn.q.weight, layer.attn.q.bias);
  const Tensor k = linear(h, layer.attn.k.weight, layer.attn.k.bias);
  const Tensor v = linear(h, layer.attn.v.weight, layer.attn.v.bias);
  Tensor scores;
  const Tensor a = multi_head_attention(q, k, v, n_heads, materialize_scores ? &scores : nullptr);

  result.hidden = z;
  add_inplace(result.hidden, linear(a, layer.attn.o.weight, layer.attn.o.bias));
  const Tensor h2 = layernorm(result.hidden, layer.mlp_ln.gamma, layer.mlp_ln.beta);
  const Tensor f = gelu(linear(h2, layer.fc1.weight, layer.fc1.bias));
  add_inplace(result.hidden, linear(f, layer.fc2.weight, layer.fc2.bias));
  if (materialize_scores) result.scores = std::move(scores);
  return result;
}

// ---------------------------------------------------------------------------
// Encoder

struct EncoderTrace {
  Tensor hidden;                                // [T',N] after the final LayerNorm
  IndexList kept;                               // ascending indices into the stem output
  std::optional<Tensor> tap_attention;          // [H,T,T] at the tap layer, if requested
  std::vector<ImportanceVector> layer_importance;  // one per layer in cross-layer mode
  ImportanceVector importance;                  // vector used for the top-k selection
};

struct EncodeOptions {
  /// Keep the attention tensor of this 1-based layer in the trace. With EAS
  /// active and no explicit layer, the sparsification layer is used.
  std::optional<std::size_t> tap_layer;
  bool keep_tap = false;
};

/// Convolutional stem (conv + GELU per layer) plus sinusoidal positions.
inline Tensor run_stem(const Tensor& features, const Model& model) {
  const auto& cfg = model.config;
  require_rank(features, 2, "features");
  if (features.dim(1) != cfg.n_mel) {
    fail(ErrorKind::Dimension, "features have " + std::to_string(features.dim(1)) + " mel bins, model expects " +
                                   std::to_string(cfg.n_mel));
  }
  if (features.dim(0) > cfg.max_feature_frames()) {
    fail(ErrorKind::Dimension, "feature length " + std::to_string(features.dim(0)) + " exceeds stem capacity " +
                                   std::to_string(cfg.max_feature_frames()));
  }
  Tensor x = features;
  for (std::size_t i = 0; i < cfg.stem.size(); ++i) {
    const auto& c = cfg.stem[i];
    x = gelu(conv1d(x, model.weights.stem[i].weight, model.weights.stem[i].bias, c.stride, c.kernel / 2));
  }
  const std::size_t t = x.dim(0), n = x.dim(1);
  for (std::size_t r = 0; r < t; ++r) {
    auto row = x.row(r);
    auto pe = model.weights.encoder_positions.row(r);
    for (std::size_t j = 0; j < n; ++j) row[j] += pe[j];
  }
  return x;
}

/// Encoder layers 1..L over the stem output. With EAS, after layer `stage`
/// the hidden state is gathered down to keep_count(T, s) rows and the
/// remaining layers run on the shorter sequence. Positions are not
/// re-applied after the gather.
inline EncoderTrace run_encoder_stack(Tensor z, const Model& model, const std::optional<EasConfig>& eas,
                                      const EncodeOptions& options = {}) {
  const auto& cfg = model.config;
  const std::size_t n_layers = cfg.n_encoder_layers;
  if (eas) eas->validate(static_cast<int>(n_layers));
  std::optional<std::size_t> tap = options.tap_layer;
  if (!tap && options.keep_tap && eas) tap = static_cast<std::size_t>(eas->stage);
  if (tap && (*tap < 1 || *tap > n_layers)) fail(ErrorKind::Config, "tap layer out of range");

  EncoderTrace trace;
  trace.kept.resize(z.dim(0));
  std::iota(trace.kept.begin(), trace.kept.end(), std::size_t{0});

  for (std::size_t l = 1; l <= n_layers; ++l) {
    const bool at_stage = eas && static_cast<std::size_t>(eas->stage) == l;
    const bool needs_scores = eas && eas->aggregation != Aggregation::Random && (at_stage || eas->cross_layer);
    const bool materialize = needs_scores || (tap && *tap == l);
    EncoderLayerOutput out = encoder_layer_forward(z, model.weights.encoder[l - 1], cfg.n_heads, materialize);
    z = std::move(out.hidden);

    if (needs_scores) trace.layer_importance.push_back(importance_mean(*out.scores));
    if (tap && *tap == l) trace.tap_attention = std::move(out.scores);

    if (at_stage) {
      trace.importance = eas->aggregation == Aggregation::Random
                             ? random_importance(z.dim(0), eas->rng_seed)
                             : aggregate_cross_layer(trace.layer_importance, eas->aggregation, eas->rng_seed);
      if (!eas->cross_layer) trace.layer_importance.clear();
      SparsifyResult cut = sparsify(z, trace.importance, eas->sparsity);
      z = std::move(cut.hidden);
      trace.kept = std::move(cut.kept);
    }
  }
  trace.hidden = layernorm(z, model.weights.encoder_ln.gamma, model.weights.encoder_ln.beta);
  return trace;
}

inline EncoderTrace encode(const Tensor& features, const Model& model, const std::optional<EasConfig>& eas = {},
                           const EncodeOptions& options = {}) {
  return run_encoder_stack(run_stem(features, model), model, eas, options);
}

// ---------------------------------------------------------------------------
// Decoder

/// Incremental decoder state: cross-attention keys/values are computed once
/// from the encoder output, self-attention keys/values are cached per step.
class DecoderSession {
 public:
  DecoderSession(const Model& model, const Tensor& encoder_out) : model_(model) {
    require_rank(encoder_out, 2, "encoder output");
    if (encoder_out.dim(1) != model.config.d_model) fail(ErrorKind::Dimension, "encoder output width mismatch");
    for (const auto& layer : model.weights.decoder) {
      cross_k_.push_back(linear(encoder_out, layer.cross_attn.k.weight, layer.cross_attn.k.bias));
      cross_v_.push_back(linear(encoder_out, layer.cross_attn.v.weight, layer.cross_attn.v.bias));
    }
    self_k_.resize(model.weights.decoder.size());
    self_v_.resize(model.weights.decoder.size());
  }

  std::size_t position() const noexcept { return position_; }

  /// Feeds `token` at the next position and returns next-token logits.
  std::vector<float> step(int token) {
    const auto& cfg = model_.config;
    const auto& w = model_.weights;
    const std::size_t n = cfg.d_model;
    if (token < 0 || static_cast<std::size_t>(token) >= cfg.vocab_size) {
      fail(ErrorKind::Argument, "token id " + std::to_string(token) + " outside vocabulary");
    }
    if (position_ >= cfg.max_target_len) fail(ErrorKind::Argument, "decoder ran past max_target_len");

    Tensor x({1, n});
    auto emb = w.token_embedding.row(static_cast<std::size_t>(token));
    auto pos = w.decoder_positions.row(position_);
    for (std::size_t j = 0; j < n; ++j) x[j] = emb[j] + pos[j];

    const std::size_t len = position_ + 1;
    for (std::size_t l = 0; l < w.decoder.size(); ++l) {
      const auto& layer = w.decoder[l];
      {
        const Tensor h = layernorm(x, layer.self_ln.gamma, layer.self_ln.beta);
        const Tensor q = linear(h, layer.self_attn.q.weight, layer.self_attn.q.bias);
        const Tensor k = linear(h, layer.self_attn.k.weight, layer.self_attn.k.bias);
        const Tensor v = linear(h, layer.self_attn.v.weight, layer.self_attn.v.bias);
        self_k_[l].insert(self_k_[l].end(), k.data().begin(), k.data().end());
        self_v_[l].insert(self_v_[l].end(), v.data().begin(), v.data().end());
        const Tensor kc({len, n}, self_k_[l]);
        const Tensor vc({len, n}, self_v_[l]);
        const Tensor a = multi_head_attention(q, kc, vc, cfg.n_heads);
        add_inplace(x, linear(a, layer.self_attn.o.weight, layer.self_attn.o.bias));
      }
      {
        const Tensor h = layernorm(x, layer.cross_ln.gamma, layer.cross_ln.beta);
        const Tensor q = linear(h, layer.cross_attn.q.weight, layer.cross_attn.q.bias);
        const Tensor a = multi_head_attention(q, cross_k_[l], cross_v_[l], cfg.n_heads);
        add_inplace(x, linear(a, layer.cross_attn.o.weight, layer.cross_attn.o.bias));
      }
      {
        const Tensor h = layernorm(x, layer.mlp_ln.gamma, layer.mlp_ln.beta);
        const Tensor f = gelu(linear(h, layer.fc1.weight, layer.fc1.bias));
        add_inplace(x, linear(f, layer.fc2.weight, layer.fc2.bias));
      }
    }
    const Tensor h = layernorm(x, w.decoder_ln.gamma, w.decoder_ln.beta);
    const Tensor logits = matmul(h, w.lm_head);
    ++position_;
    return logits.values();
  }

 private:
  const Model& model_;
  std::vector<Tensor> cross_k_, cross_v_;
  std::vector<std::vector<float>> self_k_, self_v_;
  std::size_t position_ = 0;
};

inline int argmax(std::span<const float> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<int>(best);
}

struct DecodeResult {
  std::vector<int> tokens;  // start and end tokens excluded
  bool cap_hit = false;
};

/// Greedy decoding from the start token. Stops on the end token or after
/// `max_new_tokens` tokens (defaults to the config ceiling; never more than
/// the decoder position table allows).
inline DecodeResult greedy_decode(const EncoderTrace& trace, const Model& model,
                                  std::optional<std::size_t> max_new_tokens = {}) {
  const auto& cfg = model.config;
  std::size_t cap = std::min(max_new_tokens.value_or(cfg.max_new_tokens), cfg.max_target_len - 1);
  if (cap == 0) fail(ErrorKind::Config, "max_new_tokens must be at least 1");

  DecoderSession session(model, trace.hidden);
  DecodeResult result;
  int token = cfg.sot_token;
  for (std::size_t i = 0; i < cap; ++i) {
    const int next = argmax(session.step(token));
    if (next == cfg.eot_token) return result;
    result.tokens.push_back(next);
    token = next;
  }
  result.cap_hit = true;
  return result;
}

}  // namespace eas
