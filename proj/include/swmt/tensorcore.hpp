/*
 * Copyright 2026 The swmt Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Dense f64 kernels shared by every other module: a row-major matrix, the
// numerically stable activations used by the losses, and a seeded PRNG whose
// stream is identical on every platform.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "swmt/error.hpp"

namespace swmt {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    require_dims(data_.size(), rows * cols, "matrix value count");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

// ---------------------------------------------------------------------------
// Activations

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline Vector sigmoid(std::span<const double> v) {
  Vector out(v.size());
  std::transform(v.begin(), v.end(), out.begin(),
                 [](double z) { return sigmoid(z); });
  return out;
}

inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) fail(ErrorKind::dimension, "log_sum_exp of an empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline Vector softmax(std::span<const double> v) {
  if (v.empty()) fail(ErrorKind::dimension, "softmax of an empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

/// Lowest index attaining the maximum.
inline std::size_t argmax(std::span<const double> v) {
  if (v.empty()) fail(ErrorKind::dimension, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Linear algebra used by the networks. Callers own dimension agreement.

/// y += W x
inline void gemv_add(const Matrix& w, std::span<const double> x, std::span<double> y) {
  const std::size_t cols = w.cols();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double* wr = w.row(r).data();
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

/// out += W^T g
inline void gemv_t_add(const Matrix& w, std::span<const double> g, std::span<double> out) {
  const std::size_t cols = w.cols();
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* wr = w.row(r).data();
    for (std::size_t c = 0; c < cols; ++c) out[c] += wr[c] * gr;
  }
}

/// G += g x^T
inline void outer_add(Matrix& grad, std::span<const double> g, std::span<const double> x) {
  const std::size_t cols = grad.cols();
  for (std::size_t r = 0; r < grad.rows(); ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    double* dr = grad.row(r).data();
    for (std::size_t c = 0; c < cols; ++c) dr[c] += gr * x[c];
  }
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------
// SeededRng: SplitMix64. Every draw is defined by integer arithmetic and libm
// calls on doubles, so one seed yields one stream everywhere. Child streams are
// derived by hashing (seed, index), never by sharing an instance.

class SeededRng {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64";

  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), state_(seed) {}

  /// Full generator position, including a pending Box-Muller variate.
  struct Snapshot {
    std::uint64_t seed = 0;
    std::uint64_t state = 0;
    bool has_spare = false;
    double spare = 0.0;
  };

  std::uint64_t seed() const noexcept { return seed_; }
  Snapshot snapshot() const noexcept { return {seed_, state_, has_spare_, spare_}; }
  void restore(const Snapshot& s) noexcept {
    seed_ = s.seed;
    state_ = s.state;
    has_spare_ = s.has_spare;
    spare_ = s.spare;
  }

  std::uint64_t next_u64() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) fail(ErrorKind::invalid_argument, "SeededRng::below(0)");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  /// Standard normal via Box-Muller; both variates are consumed in turn.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Independent child stream keyed by (seed, index).
  static SeededRng child(std::uint64_t seed, std::uint64_t index) noexcept {
    return SeededRng(derive_seed(seed, index));
  }

  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix(mix(seed + 0x9E3779B97F4A7C15ULL) ^ mix(index + 0xD1B54A32D192ED03ULL));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace swmt
