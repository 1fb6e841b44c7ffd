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

// Tensor archive: the little-endian binary container for weights, features
// and exported activations.
//
//   magic    4 bytes  "EAS1"
//   count    u32
//   count x:
//     name_len u32, name (UTF-8, name_len bytes)
//     rank     u32, extents u64 x rank
//     payload  float32 x product(extents), row-major
//
// All integers and floats are little-endian. Names are unique. A malformed
// archive is rejected as a whole with the byte offset of the problem.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eas/error.hpp"
#include "eas/model.hpp"
#include "eas/tensor.hpp"

namespace eas {

inline constexpr char kArchiveMagic[4] = {'E', 'A', 'S', '1'};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(std::string_view bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorKind::Data, source_ + ": " + what + " at byte offset " + std::to_string(pos_));
  }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) error(std::string("truncated ") + what);
  }

  std::uint64_t uint(int width, const char* what) {
    need(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace detail

class TensorArchive {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(std::string name, Tensor tensor) {
    if (index_.count(name)) fail(ErrorKind::Argument, "duplicate archive entry '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(tensor));
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const Tensor& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorKind::Data, "archive has no entry '" + name + "'");
    return entries_[it->second].second;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::string serialize() const {
    std::string out(kArchiveMagic, 4);
    detail::put_u32(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, t] : entries_) {
      detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
      out += name;
      detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
      for (auto e : t.shape()) detail::put_u64(out, e);
      out.reserve(out.size() + 4 * t.numel());
      for (float v : t.data()) detail::put_f32(out, v);
    }
    return out;
  }

  static TensorArchive parse(std::string_view bytes, const std::string& source = "archive") {
    detail::Reader r(bytes, source);
    auto magic = r.take(4, "magic");
    if (magic != std::string_view(kArchiveMagic, 4)) {
      fail(ErrorKind::Data, source + ": bad magic, expected \"EAS1\" at byte offset 0");
    }
    const auto count = r.uint(4, "entry count");
    TensorArchive archive;
    for (std::uint64_t e = 0; e < count; ++e) {
      const std::size_t entry_offset = r.offset();
      const auto name_len = r.uint(4, "name length");
      std::string name(r.take(static_cast<std::size_t>(name_len), "entry name"));
      if (archive.contains(name)) {
        fail(ErrorKind::Data, source + ": duplicate entry '" + name + "' at byte offset " +
                                  std::to_string(entry_offset));
      }
      const auto rank = r.uint(4, "rank");
      if (rank == 0 || rank > 16) r.error("unsupported rank " + std::to_string(rank) + " in entry '" + name + "'");
      Shape shape;
      std::uint64_t numel = 1;
      for (std::uint64_t d = 0; d < rank; ++d) {
        const auto extent = r.uint(8, "extent");
        if (extent == 0) r.error("zero extent in entry '" + name + "'");
        if (numel > (std::uint64_t{1} << 40) / extent) r.error("implausible size in entry '" + name + "'");
        numel *= extent;
        shape.push_back(static_cast<std::size_t>(extent));
      }
      auto payload = r.take(static_cast<std::size_t>(numel * 4), ("payload of '" + name + "'").c_str());
      std::vector<float> data(static_cast<std::size_t>(numel));
      for (std::size_t i = 0; i < data.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= std::uint32_t(static_cast<unsigned char>(payload[4 * i + b])) << (8 * b);
        std::memcpy(&data[i], &bits, sizeof bits);
      }
      archive.add(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    if (!r.at_end()) r.error("trailing bytes after last entry");
    return archive;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Data, "cannot open '" + path + "' for writing");
    const std::string bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Data, "failed writing '" + path + "'");
  }

  static TensorArchive load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Data, "cannot open archive '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Model <-> archive. The config travels as a float vector entry; every
// integer field is far below 2^24 so the round trip is exact.

inline constexpr const char* kConfigEntry = "meta.config";
inline constexpr float kConfigVersion = 1.0f;

inline Tensor encode_config(const ModelConfig& c) {
  std::vector<float> v{kConfigVersion,
                       float(c.n_mel),
                       float(c.d_model),
                       float(c.n_heads),
                       float(c.n_encoder_layers),
                       float(c.n_decoder_layers),
                       float(c.vocab_size),
                       float(c.ffn_dim),
                       float(c.max_source_len),
                       float(c.max_target_len),
                       float(c.max_new_tokens),
                       float(c.eot_token),
                       float(c.sot_token),
                       float(c.stem.size())};
  for (const auto& s : c.stem) {
    v.push_back(float(s.kernel));
    v.push_back(float(s.stride));
  }
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

inline ModelConfig decode_config(const Tensor& t) {
  const auto& v = t.values();
  if (t.rank() != 1 || v.size() < 14 || v[0] != kConfigVersion) {
    fail(ErrorKind::Data, "'" + std::string(kConfigEntry) + "' is not a version-1 model config");
  }
  auto count = [&](std::size_t i) {
    if (v[i] < 0 || v[i] != std::floor(v[i])) fail(ErrorKind::Data, "non-integral config field " + std::to_string(i));
    return static_cast<std::size_t>(v[i]);
  };
  ModelConfig c;
  c.n_mel = count(1);
  c.d_model = count(2);
  c.n_heads = count(3);
  c.n_encoder_layers = count(4);
  c.n_decoder_layers = count(5);
  c.vocab_size = count(6);
  c.ffn_dim = count(7);
  c.max_source_len = count(8);
  c.max_target_len = count(9);
  c.max_new_tokens = count(10);
  c.eot_token = static_cast<int>(count(11));
  c.sot_token = static_cast<int>(count(12));
  const std::size_t n_stem = count(13);
  if (v.size() != 14 + 2 * n_stem) fail(ErrorKind::Data, "model config stem list has wrong length");
  c.stem.clear();
  for (std::size_t i = 0; i < n_stem; ++i) c.stem.push_back({count(14 + 2 * i), count(15 + 2 * i)});
  c.validate();
  return c;
}

inline TensorArchive model_to_archive(const Model& model) {
  TensorArchive archive;
  archive.add(kConfigEntry, encode_config(model.config));
  visit_tensors(model.weights, [&](const std::string& name, const Tensor& t) { archive.add(name, t); });
  return archive;
}

inline Model model_from_archive(const TensorArchive& archive) {
  Model model;
  model.config = decode_config(archive.get(kConfigEntry));
  model.weights = allocate_weights(model.config);
  std::size_t used = 1;
  visit_tensors(model.weights, [&](const std::string& name, Tensor& t) {
    const Tensor& stored = archive.get(name);
    if (stored.shape() != t.shape()) {
      fail(ErrorKind::Data, "weight '" + name + "' has shape " + shape_string(stored.shape()) + ", expected " +
                                shape_string(t.shape()));
    }
    t = stored;
    ++used;
  });
  if (used != archive.size()) fail(ErrorKind::Data, "model archive contains unrecognized entries");
  model.validate();
  return model;
}

inline Model load_model(const std::string& path) { return model_from_archive(TensorArchive::load(path)); }

inline void save_model(const Model& model, const std::string& path) { model_to_archive(model).save(path); }

}  // namespace eas
