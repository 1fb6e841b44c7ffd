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

// Synthetic "echo" transcription task with hand-constructed weights, so a
// desk-scale model transcribes without training.
//
// Audio: the padded input is split into slots of kSlotFrames encoder frames.
// Utterance word j fills the middle of slot j (one mel bin per vocabulary
// word, scaled by a per-word loudness). Slot edges and the trailing padding
// light a dedicated "silence" bin.
//
// Weights: every tensor starts from small seeded Gaussian noise, and a sparse
// structure is added on top:
//   * the stem copies the word bin into a word channel plus a shared
//     "speech" channel, and the silence bin into a silence channel;
//   * every encoder head attends toward speech frames, so the mean attention
//     each frame receives is high for speech and low for silence;
//   * decoder position j carries the sinusoid of slot j's centre, and the
//     first decoder layer's cross-attention matches it against the
//     sinusoidal positions the encoder frames still carry, then copies the
//     matched frame's word channel into the logits. Silence maps to the end
//     token.
// Dropped speech frames therefore cost words, and once the trailing silence
// is gone the decoder keeps re-reading the last word until the token cap.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "eas/archive.hpp"
#include "eas/dataset.hpp"
#include "eas/error.hpp"
#include "eas/model.hpp"
#include "eas/random.hpp"

namespace eas {

inline constexpr std::array<std::string_view, 32> kEchoWords = {
    "alpha", "bravo",  "charlie", "delta", "echo",    "foxtrot", "golf",   "hotel",
    "india", "juliet", "kilo",    "lima",  "mike",    "november", "oscar", "papa",
    "quebec", "romeo", "sierra",  "tango", "uniform", "victor",  "whiskey", "xray",
    "yankee", "zulu",  "one",     "two",   "three",   "four",    "five",    "six"};

inline constexpr int kEotToken = 0;
inline constexpr int kSotToken = 1;
inline constexpr int kFirstWordToken = 2;
inline constexpr std::size_t kEchoVocab = kEchoWords.size() + 2;
inline constexpr std::size_t kSlotFrames = 8;     // encoder frames per word slot
inline constexpr std::size_t kMatchFrequencies = 8;
inline constexpr double kFrameSeconds = 0.01;     // one feature frame

inline int word_token(std::size_t word) { return kFirstWordToken + static_cast<int>(word); }

/// Space-joined words for the generated tokens; special tokens are skipped.
inline std::string detokenize(const std::vector<int>& tokens) {
  std::string out;
  for (int t : tokens) {
    if (t < kFirstWordToken || t >= static_cast<int>(kEchoVocab)) continue;
    if (!out.empty()) out += ' ';
    out += kEchoWords[static_cast<std::size_t>(t - kFirstWordToken)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Presets

inline ModelConfig preset_config(std::string_view name) {
  ModelConfig c;
  c.n_mel = 40;
  c.vocab_size = kEchoVocab;
  c.eot_token = kEotToken;
  c.sot_token = kSotToken;
  c.n_decoder_layers = 2;
  c.stem = {{3, 1}, {3, 2}};
  if (name == "tiny") {
    c.d_model = 64;
    c.n_heads = 4;
    c.n_encoder_layers = 4;
    c.ffn_dim = 256;
    c.max_source_len = 128;
    c.max_target_len = 128;
    c.max_new_tokens = 96;
  } else if (name == "small") {
    c.d_model = 128;
    c.n_heads = 8;
    c.n_encoder_layers = 8;
    c.ffn_dim = 512;
    c.max_source_len = 512;
    c.max_target_len = 256;
    c.max_new_tokens = 224;
  } else {
    fail(ErrorKind::Config, "unknown preset '" + std::string(name) + "' (expected tiny or small)");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Channel layout

struct EchoLayout {
  std::size_t slots = 0;
  std::size_t frames_per_slot = 0;        // feature frames
  std::vector<std::size_t> match_channels;  // sin/cos channels used for slot matching
  std::vector<double> match_omegas;         // angular frequency per match channel
  std::vector<bool> match_is_sin;
  std::size_t ref = 0;      // sin channel of the slowest frequency; its position signal stays ~0
  std::size_t speech = 0;
  std::size_t silence = 0;
  std::size_t constant = 0;  // decoder-only channel pinned to 1 by the final LayerNorm
  std::vector<std::size_t> words;
  std::size_t silence_bin = kEchoWords.size();  // mel bin lit by silence
};

inline EchoLayout echo_layout(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.d_model, half = n / 2;
  if (cfg.head_dim() < 2 * kMatchFrequencies) {
    fail(ErrorKind::Config, "echo weights need head_dim >= " + std::to_string(2 * kMatchFrequencies));
  }
  if (cfg.n_mel <= kEchoWords.size()) fail(ErrorKind::Config, "echo task needs more mel bins than words");
  if (cfg.vocab_size != kEchoVocab) fail(ErrorKind::Config, "echo task needs vocab_size " + std::to_string(kEchoVocab));
  const std::size_t value_channels = kEchoWords.size() + 1;
  if ((value_channels + cfg.head_dim() - 1) / cfg.head_dim() > cfg.n_heads) {
    fail(ErrorKind::Config, "not enough cross-attention heads to carry the echo vocabulary");
  }

  EchoLayout lay;
  lay.slots = cfg.max_source_len / kSlotFrames;
  std::size_t stride = 1;
  for (const auto& s : cfg.stem) stride *= s.stride;
  lay.frames_per_slot = kSlotFrames * stride;
  if (lay.slots < 4) fail(ErrorKind::Config, "max_source_len too short for the echo task");
  lay.ref = half - 1;

  // Match frequencies: geometric between a slot-resolving high frequency and
  // one slow enough that cos(omega * dt) stays monotone across the input.
  const double hi = 0.55;
  const double lo = 3.14159265358979 / (1.25 * static_cast<double>(cfg.max_source_len));
  std::set<std::size_t> chosen;
  for (std::size_t f = 0; f < kMatchFrequencies; ++f) {
    const double target = hi * std::pow(lo / hi, static_cast<double>(f) / (kMatchFrequencies - 1));
    std::size_t best = 0;
    double best_err = 1e300;
    for (std::size_t i = 0; i + 1 < half; ++i) {
      if (chosen.count(i)) continue;
      const double err = std::abs(std::log(sinusoid_frequency(i, n) / target));
      if (err < best_err) {
        best_err = err;
        best = i;
      }
    }
    chosen.insert(best);
  }
  for (std::size_t i : chosen) {
    lay.match_channels.push_back(i);
    lay.match_omegas.push_back(sinusoid_frequency(i, n));
    lay.match_is_sin.push_back(true);
    lay.match_channels.push_back(half + i);
    lay.match_omegas.push_back(sinusoid_frequency(i, n));
    lay.match_is_sin.push_back(false);
  }
  std::vector<std::size_t> free;
  for (std::size_t c = 0; c < n; ++c) {
    if (c == lay.ref) continue;
    if (std::find(lay.match_channels.begin(), lay.match_channels.end(), c) != lay.match_channels.end()) continue;
    free.push_back(c);
  }
  if (free.size() < kEchoWords.size() + 3) fail(ErrorKind::Config, "d_model too small for the echo layout");
  lay.speech = free[0];
  lay.silence = free[1];
  lay.constant = free[2];
  lay.words.assign(free.begin() + 3, free.begin() + 3 + static_cast<std::ptrdiff_t>(kEchoWords.size()));
  return lay;
}

/// Centre (in encoder frames) of the slot decoder step `step` reads.
inline double slot_centre(const EchoLayout& lay, std::size_t step) {
  const std::size_t slot = std::min(step, lay.slots - 1);
  return static_cast<double>(slot * kSlotFrames) + (kSlotFrames - 1) / 2.0;
}

// ---------------------------------------------------------------------------
// Weights

inline constexpr float kStemGain = 8.0f;
inline constexpr float kEncoderFocus = 4.0f;  // query bias pulling encoder heads toward speech
inline constexpr float kMatchSharpness = 2.0f;  // logits per unit of slot-kernel similarity
inline constexpr float kReadoutGain = 2.0f;
inline constexpr float kPinnedLogit = 50.0f;

/// Dense weights drawn N(0, sigma) with LayerNorm gains one and biases zero.
/// Draw order follows visit_tensors, so the stream is reproducible.
inline Model make_random_model(const ModelConfig& cfg, std::uint64_t seed, double sigma = 0.02) {
  Model m{cfg, allocate_weights(cfg)};
  Rng rng(seed);
  visit_tensors(m.weights, [&](const std::string& name, Tensor& t) {
    if (name == "encoder.positions") return;
    const bool is_ln = name.ends_with(".gamma") || name.ends_with(".beta");
    const bool is_bias = name.ends_with(".bias");
    if (is_ln || is_bias) return;
    const double sd = name.starts_with("encoder.stem") ? sigma / 4.0 : sigma;
    for (float& v : t.data()) v = static_cast<float>(rng.normal(0.0, sd));
  });
  return m;
}

/// Echo-task weights: seeded noise plus the structure described above.
inline Model make_echo_model(const ModelConfig& cfg, std::uint64_t seed) {
  const EchoLayout lay = echo_layout(cfg);
  // Noise shrinks with width and depth so deeper presets keep the same
  // signal margin on the match channels as the tiny one.
  const double noise = 0.02 * std::sqrt(64.0 * 4.0 / static_cast<double>(cfg.d_model * cfg.n_encoder_layers));
  Model m = make_random_model(cfg, seed, std::min(0.02, noise));
  auto& w = m.weights;
  const std::size_t n = cfg.d_model, dh = cfg.head_dim();

  // Stem: centre taps route word / silence bins into their channels.
  {
    auto& c0 = w.stem.front().weight;
    const std::size_t centre = cfg.stem.front().kernel / 2;
    for (std::size_t word = 0; word < kEchoWords.size(); ++word) {
      c0.at(lay.words[word], word, centre) += kStemGain;
      c0.at(lay.speech, word, centre) += kStemGain;
    }
    c0.at(lay.silence, lay.silence_bin, centre) += kStemGain * std::sqrt(2.0f);
    std::vector<std::size_t> content = lay.words;
    content.push_back(lay.speech);
    content.push_back(lay.silence);
    for (std::size_t i = 1; i < w.stem.size(); ++i) {
      const std::size_t mid = cfg.stem[i].kernel / 2;
      for (std::size_t ch : content) w.stem[i].weight.at(ch, ch, mid) += 1.0f;
    }
  }

  // Encoder: each head's query is a constant (bias) and its key reads the
  // speech channel relative to the reference channel.
  for (auto& layer : w.encoder) {
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const std::size_t col = h * dh;
      layer.attn.q.bias[col] += kEncoderFocus * (1.0f + 0.1f * static_cast<float>(h));
      layer.attn.k.weight.at(lay.speech, col) += 1.0f;
      layer.attn.k.weight.at(lay.ref, col) -= 1.0f;
    }
  }

  // Nominal LayerNorm scales of an encoder frame and a decoder position,
  // used to set the slot-match sharpness.
  const double enc_sq = 2.0 * kStemGain * kStemGain + static_cast<double>(n) / 2.0;
  const double sigma_enc = std::sqrt(enc_sq / static_cast<double>(n));
  const double sigma_dec = std::sqrt(static_cast<double>(kMatchFrequencies) / static_cast<double>(n));
  const float match_gain =
      static_cast<float>(kMatchSharpness * sigma_enc * sigma_dec * std::sqrt(static_cast<double>(dh)));

  std::vector<std::size_t> value_channels = lay.words;
  value_channels.push_back(lay.silence);
  const std::size_t value_heads = (value_channels.size() + dh - 1) / dh;

  auto& cross = w.decoder.front().cross_attn;
  for (std::size_t h = 0; h < value_heads; ++h) {
    for (std::size_t d = 0; d < lay.match_channels.size(); ++d) {
      const std::size_t col = h * dh + d;
      const std::size_t ch = lay.match_channels[d];
      cross.q.weight.at(ch, col) += match_gain;
      cross.q.weight.at(lay.ref, col) -= match_gain;
      cross.k.weight.at(ch, col) += 1.0f;
      cross.k.weight.at(lay.ref, col) -= 1.0f;
    }
  }
  for (std::size_t i = 0; i < value_channels.size(); ++i) {
    const std::size_t col = (i / dh) * dh + i % dh;
    const std::size_t ch = value_channels[i];
    cross.v.weight.at(ch, col) += 1.0f;
    cross.v.weight.at(lay.ref, col) -= 1.0f;
    cross.o.weight.at(col, ch) += kReadoutGain;
  }

  // Decoder positions: the slot-centre sinusoid on the match channels.
  for (std::size_t j = 0; j < cfg.max_target_len; ++j) {
    const double centre = slot_centre(lay, j);
    for (std::size_t d = 0; d < lay.match_channels.size(); ++d) {
      const double angle = lay.match_omegas[d] * centre;
      w.decoder_positions.at(j, lay.match_channels[d]) +=
          static_cast<float>(lay.match_is_sin[d] ? std::sin(angle) : std::cos(angle));
    }
  }

  // Readout: word channel -> word token, silence -> end token, and a pinned
  // constant channel that keeps the start token from ever being emitted.
  w.decoder_ln.gamma[lay.constant] = 0.0f;
  w.decoder_ln.beta[lay.constant] = 1.0f;
  for (std::size_t word = 0; word < kEchoWords.size(); ++word) {
    w.lm_head.at(lay.words[word], static_cast<std::size_t>(word_token(word))) += 1.0f;
  }
  w.lm_head.at(lay.silence, static_cast<std::size_t>(kEotToken)) += 1.0f;
  w.lm_head.at(lay.constant, static_cast<std::size_t>(kSotToken)) -= kPinnedLogit;
  return m;
}

/// Echo weights whose end token can never win: every decode runs to the cap.
inline Model make_never_stop_model(const ModelConfig& cfg, std::uint64_t seed) {
  Model m = make_echo_model(cfg, seed);
  const EchoLayout lay = echo_layout(cfg);
  m.weights.lm_head.at(lay.constant, static_cast<std::size_t>(kEotToken)) -= kPinnedLogit;
  return m;
}

/// Echo weights whose end token always wins: every decode is empty.
inline Model make_immediate_stop_model(const ModelConfig& cfg, std::uint64_t seed) {
  Model m = make_echo_model(cfg, seed);
  const EchoLayout lay = echo_layout(cfg);
  m.weights.lm_head.at(lay.constant, static_cast<std::size_t>(kEotToken)) += kPinnedLogit;
  return m;
}

// ---------------------------------------------------------------------------
// Examples

struct EchoExample {
  Tensor features;
  std::vector<std::size_t> words;
  double duration_seconds = 0.0;
  std::string reference_text;  // capitalized, with a final period
};

inline std::string echo_reference_text(const std::vector<std::size_t>& words) {
  std::string text;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) text += ' ';
    text += kEchoWords[words[i]];
  }
  if (!text.empty()) text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
  return text + ".";
}

/// One utterance filling between an eighth and half of the available
/// slots, padded with silence to the stem capacity.
inline EchoExample make_echo_example(const ModelConfig& cfg, Rng& rng) {
  const EchoLayout lay = echo_layout(cfg);
  const std::size_t frames = lay.slots * lay.frames_per_slot;
  const auto min_words = static_cast<std::int64_t>(std::max<std::size_t>(1, lay.slots / 8));
  const auto max_words = static_cast<std::int64_t>(lay.slots / 2);
  const auto count = static_cast<std::size_t>(rng.uniform_int(min_words, max_words));

  EchoExample ex;
  ex.features = Tensor({frames, cfg.n_mel});
  for (float& v : ex.features.data()) v = static_cast<float>(rng.normal(0.0, 0.05));
  // Speech occupies feature frames [edge, frames_per_slot - edge) of its slot.
  const std::size_t edge = lay.frames_per_slot / kSlotFrames;
  for (std::size_t slot = 0; slot < lay.slots; ++slot) {
    const bool spoken = slot < count;
    std::size_t word = 0;
    double loudness = 1.0;
    if (spoken) {
      word = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(kEchoWords.size()) - 1));
      loudness = rng.uniform(0.85, 1.15);
      ex.words.push_back(word);
    }
    for (std::size_t f = 0; f < lay.frames_per_slot; ++f) {
      const std::size_t frame = slot * lay.frames_per_slot + f;
      const bool speech = spoken && f >= edge && f < lay.frames_per_slot - edge;
      if (speech) {
        ex.features.at(frame, word) += static_cast<float>(loudness * (1.0 + 0.05 * rng.normal()));
      } else {
        ex.features.at(frame, lay.silence_bin) += 1.0f;
      }
    }
  }
  ex.duration_seconds = static_cast<double>(count * lay.frames_per_slot) * kFrameSeconds;
  ex.reference_text = echo_reference_text(ex.words);
  return ex;
}

inline std::vector<TaskExample> make_echo_dataset(const ModelConfig& cfg, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TaskExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    EchoExample ex = make_echo_example(cfg, rng);
    char id[32];
    std::snprintf(id, sizeof id, "ex%05zu", i);
    out.push_back({id, std::move(ex.features), ex.duration_seconds, std::move(ex.reference_text)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fixture files

struct FixturePaths {
  std::string model;
  std::string features;
  std::string manifest;
};

inline constexpr std::uint64_t kDataSeedSalt = 0x9e3779b97f4a7c15ULL;

/// Writes model.eas, features.eas and manifest.jsonl into `dir`. The same
/// (preset, seed, n) always produces byte-identical files.
inline FixturePaths write_echo_fixtures(const std::string& dir, std::string_view preset, std::uint64_t seed,
                                        std::size_t n_examples) {
  const ModelConfig cfg = preset_config(preset);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Data, "cannot create output directory '" + dir + "': " + ec.message());

  FixturePaths paths{(std::filesystem::path(dir) / "model.eas").string(),
                     (std::filesystem::path(dir) / "features.eas").string(),
                     (std::filesystem::path(dir) / "manifest.jsonl").string()};
  save_model(make_echo_model(cfg, seed), paths.model);

  TensorArchive features;
  std::vector<ManifestRecord> manifest;
  for (auto& ex : make_echo_dataset(cfg, n_examples, seed ^ kDataSeedSalt)) {
    manifest.push_back({ex.id, "features.eas#" + ex.id, ex.duration_seconds, ex.reference_text});
    features.add(ex.id, std::move(ex.features));
  }
  features.save(paths.features);
  write_manifest(paths.manifest, manifest);
  return paths;
}

}  // namespace eas
