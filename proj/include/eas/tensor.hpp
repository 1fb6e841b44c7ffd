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

// Dense float32 tensors and the handful of kernels the transcription model
// needs. Every reduction runs in a fixed order so results are bit-exact
// across runs on one platform.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "eas/error.hpp"

namespace eas {

using Shape = std::vector<std::size_t>;
using IndexList = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Row-major float32 array. The last extent is the "row" length.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, float fill = 0.0f) : shape_(std::move(shape)) {
    check_extents();
    data_.assign(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_numel(shape_)) {
      fail(ErrorKind::Dimension, "data length " + std::to_string(data_.size()) +
                                     " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<float>> rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n ? rows.begin()->size() : 0;
    std::vector<float> data;
    data.reserve(n * m);
    for (const auto& r : rows) {
      if (r.size() != m) fail(ErrorKind::Dimension, "ragged row list");
      data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({n, m}, std::move(data));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Length of the trailing dimension.
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
  /// Number of trailing-dimension rows (product of leading extents).
  std::size_t rows() const noexcept { return cols() ? data_.size() / cols() : 0; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  float& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  float at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  float& at(std::size_t h, std::size_t i, std::size_t j) {
    return data_[(h * shape_[1] + i) * shape_[2] + j];
  }
  float at(std::size_t h, std::size_t i, std::size_t j) const {
    return data_[(h * shape_[1] + i) * shape_[2] + j];
  }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  void reshape(Shape shape) {
    if (shape_numel(shape) != data_.size()) {
      fail(ErrorKind::Dimension, "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    shape_ = std::move(shape);
  }

 private:
  void check_extents() const {
    for (auto e : shape_) {
      if (e == 0) fail(ErrorKind::Dimension, "zero extent in shape " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<float> data_;
};

/// Shape and bit pattern equality (distinguishes -0.0 from 0.0).
inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0;
}

inline bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](float v) { return std::isfinite(v); });
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    fail(ErrorKind::Dimension, std::string(what) + " expects rank " + std::to_string(rank) +
                                   ", got " + shape_string(t.shape()));
  }
}

// C[i,j] accumulates A[i,k]*B[k,j] for k = 0..K-1 in order. The inner loop
// runs over j so the compiler can vectorize without reordering any sum.
inline void matmul_into(std::span<const float> a, std::size_t m, std::size_t k, std::span<const float> b,
                        std::size_t p, std::span<float> out) {
  std::fill(out.begin(), out.end(), 0.0f);
  for (std::size_t i = 0; i < m; ++i) {
    float* c = out.data() + i * p;
    const float* arow = a.data() + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const float av = arow[kk];
      const float* brow = b.data() + kk * p;
      for (std::size_t j = 0; j < p; ++j) c[j] += av * brow[j];
    }
  }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  if (a.dim(1) != b.dim(0)) {
    fail(ErrorKind::Dimension, "matmul inner extents differ: " + shape_string(a.shape()) + " x " +
                                   shape_string(b.shape()));
  }
  Tensor out({a.dim(0), b.dim(1)});
  matmul_into(a.data(), a.dim(0), a.dim(1), b.data(), b.dim(1), out.data());
  return out;
}

/// y = x W + b with W stored [in, out]. The bias is added after the full sum.
inline Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  Tensor y = matmul(x, weight);
  if (bias.rank() != 1 || bias.dim(0) != y.cols()) {
    fail(ErrorKind::Dimension, "bias " + shape_string(bias.shape()) + " does not match output width " +
                                   std::to_string(y.cols()));
  }
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bias[j];
  }
  return y;
}

inline void add_inplace(Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::Dimension, "add: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += bd[i];
}

// Max-subtracted softmax over one row. Exponentials are float, the
// normalizer is accumulated in double.
inline void softmax_row_inplace(std::span<float> row) {
  if (row.empty()) return;
  const float mx = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (float& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  const double inv = 1.0 / sum;
  for (float& v : row) v = static_cast<float>(v * inv);
}

inline Tensor softmax_rows(Tensor x) {
  for (std::size_t r = 0; r < x.rows(); ++r) softmax_row_inplace(x.row(r));
  return x;
}

inline Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f) {
  const std::size_t n = x.cols();
  if (gamma.numel() != n || beta.numel() != n) {
    fail(ErrorKind::Dimension, "layernorm parameters do not match width " + std::to_string(n));
  }
  Tensor out(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    double mean = 0.0;
    for (float v : in) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (float v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    auto o = out.row(r);
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = static_cast<float>((in[j] - mean) * inv) * gamma[j] + beta[j];
    }
  }
  return out;
}

/// GELU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
inline float gelu(float x) {
  constexpr float kSqrt2OverPi = 0.7978845608028654f;
  return 0.5f * x * (1.0f + std::tanh(kSqrt2OverPi * (x + 0.044715f * x * x * x)));
}

inline Tensor gelu(Tensor x) {
  for (float& v : x.data()) v = gelu(v);
  return x;
}

inline std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                        std::size_t padding) {
  if (length + 2 * padding < kernel) return 0;
  return (length + 2 * padding - kernel) / stride + 1;
}

/// Time-major 1-D convolution.
/// x: [T, C_in], weight: [C_out, C_in, K], bias: [C_out] -> [T_out, C_out].
/// Each output sums over kernel tap, then input channel, in ascending order.
inline Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
                     std::size_t padding) {
  require_rank(x, 2, "conv1d input");
  require_rank(weight, 3, "conv1d weight");
  const std::size_t t_in = x.dim(0), c_in = x.dim(1);
  const std::size_t c_out = weight.dim(0), kernel = weight.dim(2);
  if (weight.dim(1) != c_in) {
    fail(ErrorKind::Dimension, "conv1d weight " + shape_string(weight.shape()) + " vs input channels " +
                                   std::to_string(c_in));
  }
  if (bias.numel() != c_out) fail(ErrorKind::Dimension, "conv1d bias width mismatch");
  if (stride == 0) fail(ErrorKind::Argument, "conv1d stride must be positive");
  const std::size_t t_out = conv1d_output_length(t_in, kernel, stride, padding);
  if (t_out == 0) fail(ErrorKind::Dimension, "conv1d input shorter than kernel");

  // [K, C_in, C_out] so the innermost loop is contiguous over output channels.
  std::vector<float> wt(kernel * c_in * c_out);
  for (std::size_t o = 0; o < c_out; ++o)
    for (std::size_t c = 0; c < c_in; ++c)
      for (std::size_t k = 0; k < kernel; ++k) wt[(k * c_in + c) * c_out + o] = weight.at(o, c, k);

  Tensor out({t_out, c_out});
  for (std::size_t t = 0; t < t_out; ++t) {
    auto orow = out.row(t);
    for (std::size_t k = 0; k < kernel; ++k) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + k) - static_cast<std::ptrdiff_t>(padding);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_in)) continue;
      auto xrow = x.row(static_cast<std::size_t>(src));
      for (std::size_t c = 0; c < c_in; ++c) {
        const float xv = xrow[c];
        const float* w = wt.data() + (k * c_in + c) * c_out;
        for (std::size_t o = 0; o < c_out; ++o) orow[o] += xv * w[o];
      }
    }
    for (std::size_t o = 0; o < c_out; ++o) orow[o] += bias[o];
  }
  return out;
}

/// Indices of the k largest values, ties toward the lower index, returned
/// in ascending index order.
inline IndexList topk_indices(std::span<const float> values, std::size_t k) {
  const std::size_t n = values.size();
  if (k < 1 || k > n) {
    fail(ErrorKind::Argument, "top-k with k=" + std::to_string(k) + " over " + std::to_string(n) + " values");
  }
  IndexList idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    return values[a] > values[b] || (values[a] == values[b] && a < b);
  };
  if (k < n) {
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(), before);
    idx.resize(k);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Rows of z selected by strictly ascending in-range indices.
inline Tensor gather_time(const Tensor& z, std::span<const std::size_t> idx) {
  require_rank(z, 2, "gather_time");
  if (idx.empty()) fail(ErrorKind::Argument, "gather_time with empty index list");
  const std::size_t t = z.dim(0), n = z.dim(1);
  for (std::size_t j = 0; j < idx.size(); ++j) {
    if (idx[j] >= t) {
      fail(ErrorKind::Argument, "gather index " + std::to_string(idx[j]) + " out of range [0," +
                                    std::to_string(t) + ")");
    }
    if (j > 0 && idx[j] <= idx[j - 1]) {
      fail(ErrorKind::Argument, "gather indices not strictly ascending at position " + std::to_string(j));
    }
  }
  Tensor out({idx.size(), n});
  for (std::size_t j = 0; j < idx.size(); ++j) {
    std::memcpy(out.row(j).data(), z.row(idx[j]).data(), n * sizeof(float));
  }
  return out;
}

}  // namespace eas
