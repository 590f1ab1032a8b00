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

// Dataset-derived statistics: median-frequency class weights, the tool x phase
// co-occurrence model with its inverse-frequency penalty table, and the
// feature whitening transform.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swmt/codec.hpp"
#include "swmt/error.hpp"
#include "swmt/labels.hpp"
#include "swmt/tensorcore.hpp"

namespace swmt {

inline constexpr double kDefaultEpsilon = 1e-8;
inline constexpr double kStrictEpsilon = std::numeric_limits<double>::epsilon();

struct ClassFrequencies {
  std::vector<std::uint64_t> counts;
  std::size_t n_classes() const noexcept { return counts.size(); }
};

struct ClassWeights {
  Vector w;
  std::size_t size() const noexcept { return w.size(); }
  double operator[](std::size_t i) const { return w[i]; }
};

/// Median with the even-length rule: mean of the two middle values.
inline double median_of(std::vector<double> values) {
  if (values.empty()) fail(ErrorKind::dimension, "median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline ClassWeights compute_class_weights(const ClassFrequencies& freq) {
  if (freq.counts.empty()) fail(ErrorKind::dimension, "no classes");
  double total = 0.0;
  for (std::size_t c = 0; c < freq.counts.size(); ++c) {
    if (freq.counts[c] == 0)
      fail(ErrorKind::zero_frequency, "class " + std::to_string(c) + " has zero frames");
    total += static_cast<double>(freq.counts[c]);
  }
  std::vector<double> f(freq.counts.size());
  for (std::size_t c = 0; c < f.size(); ++c) f[c] = static_cast<double>(freq.counts[c]) / total;
  const double med = median_of(f);
  ClassWeights out{Vector(f.size())};
  for (std::size_t c = 0; c < f.size(); ++c) out.w[c] = med / f[c];
  return out;
}

inline ClassFrequencies phase_frequencies(std::span<const FrameLabel> labels,
                                          std::size_t n_phases = kNumPhases) {
  ClassFrequencies f{std::vector<std::uint64_t>(n_phases, 0)};
  for (const auto& l : labels) {
    if (l.phase >= n_phases) fail(ErrorKind::dimension, "phase index out of range");
    ++f.counts[l.phase];
  }
  return f;
}

inline ClassFrequencies tool_frequencies(std::span<const FrameLabel> labels,
                                         std::size_t n_tools = kNumTools) {
  ClassFrequencies f{std::vector<std::uint64_t>(n_tools, 0)};
  for (const auto& l : labels)
    for (std::size_t t = 0; t < n_tools; ++t)
      if (l.has_tool(t)) ++f.counts[t];
  return f;
}

// ---------------------------------------------------------------------------
// Co-occurrence. Rows are tools (no-tool included as its own row), columns are
// phases. This orientation is used everywhere downstream.

class CooccurrenceModel {
 public:
  CooccurrenceModel() = default;

  /// counts is row-major n_tools x n_phases.
  CooccurrenceModel(std::size_t n_tools, std::size_t n_phases,
                    std::vector<std::uint64_t> counts, double epsilon)
      : n_tools_(n_tools), n_phases_(n_phases), counts_(std::move(counts)),
        epsilon_(epsilon), c_hat_(n_tools, n_phases), inv_freq_(n_tools, n_phases),
        unobserved_(n_phases, false) {
    if (n_tools == 0 || n_phases == 0) fail(ErrorKind::dimension, "empty co-occurrence model");
    require_dims(counts_.size(), n_tools * n_phases, "co-occurrence count table");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      fail(ErrorKind::invalid_argument, "epsilon must be positive and finite");
    for (std::size_t p = 0; p < n_phases; ++p) {
      std::uint64_t column = 0;
      for (std::size_t t = 0; t < n_tools; ++t) column += count(t, p);
      unobserved_[p] = column == 0;
      for (std::size_t t = 0; t < n_tools; ++t) {
        c_hat_(t, p) = column == 0 ? 1.0 / static_cast<double>(n_tools)
                                   : static_cast<double>(count(t, p)) /
                                         static_cast<double>(column);
        inv_freq_(t, p) = 1.0 / (c_hat_(t, p) + epsilon_);
      }
    }
  }

  std::size_t n_tools() const noexcept { return n_tools_; }
  std::size_t n_phases() const noexcept { return n_phases_; }
  double epsilon() const noexcept { return epsilon_; }
  std::uint64_t count(std::size_t tool, std::size_t phase) const {
    return counts_[tool * n_phases_ + phase];
  }
  std::span<const std::uint64_t> counts() const noexcept { return counts_; }
  const Matrix& c_hat() const noexcept { return c_hat_; }
  const Matrix& inverse_frequency() const noexcept { return inv_freq_; }
  double inv_freq(std::size_t tool, std::size_t phase) const { return inv_freq_(tool, phase); }
  /// Phases with no frames; their C_hat column is uniform.
  const std::vector<bool>& unobserved_phases() const noexcept { return unobserved_; }
  bool has_unobserved_phase() const noexcept {
    return std::find(unobserved_.begin(), unobserved_.end(), true) != unobserved_.end();
  }

  std::vector<std::string> tool_names;
  std::vector<std::string> phase_names;

 private:
  std::size_t n_tools_ = 0;
  std::size_t n_phases_ = 0;
  std::vector<std::uint64_t> counts_;
  double epsilon_ = kDefaultEpsilon;
  Matrix c_hat_;
  Matrix inv_freq_;
  std::vector<bool> unobserved_;
};

inline CooccurrenceModel build_cooccurrence(std::span<const FrameLabel> labels,
                                            double epsilon = kDefaultEpsilon,
                                            std::size_t n_tools = kNumTools,
                                            std::size_t n_phases = kNumPhases) {
  if (labels.empty()) fail(ErrorKind::invalid_argument, "no labels to count");
  std::vector<std::uint64_t> counts(n_tools * n_phases, 0);
  for (const auto& l : labels) {
    if (l.phase >= n_phases) fail(ErrorKind::dimension, "phase index out of range");
    for (std::size_t t = 0; t < n_tools; ++t)
      if (l.has_tool(t)) ++counts[t * n_phases + l.phase];
  }
  CooccurrenceModel model(n_tools, n_phases, std::move(counts), epsilon);
  if (n_tools == kNumTools && n_phases == kNumPhases) {
    model.tool_names.assign(kToolNames.begin(), kToolNames.end());
    model.phase_names.assign(kPhaseNames.begin(), kPhaseNames.end());
  }
  return model;
}

inline nlohmann::json to_json(const CooccurrenceModel& m) {
  nlohmann::json j;
  j["n_tools"] = m.n_tools();
  j["n_phases"] = m.n_phases();
  j["epsilon"] = m.epsilon();
  j["counts"] = std::vector<std::uint64_t>(m.counts().begin(), m.counts().end());
  j["tool_names"] = m.tool_names;
  j["phase_names"] = m.phase_names;
  return j;
}

inline CooccurrenceModel cooccurrence_from_json(const nlohmann::json& j) {
  try {
    CooccurrenceModel m(j.at("n_tools").get<std::size_t>(), j.at("n_phases").get<std::size_t>(),
                        j.at("counts").get<std::vector<std::uint64_t>>(),
                        j.at("epsilon").get<double>());
    m.tool_names = j.value("tool_names", std::vector<std::string>{});
    m.phase_names = j.value("phase_names", std::vector<std::string>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("co-occurrence JSON: ") + e.what());
  }
}

/// Aligned text rendering of the count table, phases across, tools down.
inline std::string format_cooccurrence_table(const CooccurrenceModel& m) {
  auto tool_label = [&](std::size_t t) {
    return t < m.tool_names.size() ? m.tool_names[t] : "tool" + std::to_string(t);
  };
  auto phase_label = [&](std::size_t p) { return "P" + std::to_string(p + 1); };
  std::size_t label_w = 4;
  for (std::size_t t = 0; t < m.n_tools(); ++t) label_w = std::max(label_w, tool_label(t).size());
  std::size_t cell_w = 6;
  for (auto c : m.counts()) cell_w = std::max(cell_w, std::to_string(c).size() + 1);

  auto pad_left = [](std::string s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
  };
  auto pad_right = [](std::string s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
  };

  std::string out = pad_right("", label_w);
  for (std::size_t p = 0; p < m.n_phases(); ++p) out += pad_left(phase_label(p), cell_w);
  out += '\n';
  for (std::size_t t = 0; t < m.n_tools(); ++t) {
    out += pad_right(tool_label(t), label_w);
    for (std::size_t p = 0; p < m.n_phases(); ++p)
      out += pad_left(std::to_string(m.count(t, p)), cell_w);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Whitening. Covariance uses the unbiased 1/(n-1) normalization.

enum class WhiteningMode { zca, standardize };

inline const char* to_string(WhiteningMode m) {
  return m == WhiteningMode::zca ? "zca" : "standardize";
}

inline WhiteningMode whitening_mode_from_string(std::string_view s) {
  if (s == "zca") return WhiteningMode::zca;
  if (s == "standardize") return WhiteningMode::standardize;
  fail(ErrorKind::config, "unknown whitening mode '" + std::string(s) + "'");
}

struct WhiteningModel {
  Vector mean;
  Matrix transform;  // D x D
  double lambda = 1e-5;
  WhiteningMode mode = WhiteningMode::zca;

  std::size_t dim() const noexcept { return mean.size(); }
};

inline Matrix sample_covariance(std::span<const Vector> xs, const Vector& mean) {
  const std::size_t d = mean.size();
  Matrix cov(d, d);
  for (const auto& x : xs) {
    for (std::size_t i = 0; i < d; ++i) {
      const double di = x[i] - mean[i];
      if (di == 0.0) continue;
      double* row = cov.row(i).data();
      for (std::size_t j = i; j < d; ++j) row[j] += di * (x[j] - mean[j]);
    }
  }
  const double denom = static_cast<double>(xs.size() - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= denom;
      cov(j, i) = cov(i, j);
    }
  return cov;
}

inline Vector sample_mean(std::span<const Vector> xs) {
  Vector mean(xs.front().size(), 0.0);
  for (const auto& x : xs)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += x[i];
  for (double& m : mean) m /= static_cast<double>(xs.size());
  return mean;
}

inline WhiteningModel fit_whitening(std::span<const Vector> features, double lambda = 1e-5,
                                    WhiteningMode mode = WhiteningMode::zca) {
  if (features.size() < 2) fail(ErrorKind::invalid_argument, "whitening needs >= 2 vectors");
  const std::size_t d = features.front().size();
  if (d == 0) fail(ErrorKind::dimension, "zero-dimensional features");
  for (const auto& x : features) require_dims(x.size(), d, "whitening feature");
  if (!(lambda >= 0.0)) fail(ErrorKind::invalid_argument, "negative whitening regularizer");

  WhiteningModel model;
  model.lambda = lambda;
  model.mode = mode;
  model.mean = sample_mean(features);
  const Matrix cov = sample_covariance(features, model.mean);
  model.transform = Matrix(d, d);

  if (mode == WhiteningMode::standardize) {
    for (std::size_t i = 0; i < d; ++i) {
      const double v = cov(i, i) + lambda;
      if (!(v > 0.0)) fail(ErrorKind::numeric, "zero variance with lambda = 0");
      model.transform(i, i) = 1.0 / std::sqrt(v);
    }
    return model;
  }

  Eigen::MatrixXd c(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) c(i, j) = cov(i, j);
  c.diagonal().array() += lambda;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c);
  if (solver.info() != Eigen::Success)
    fail(ErrorKind::numeric, "covariance eigendecomposition did not converge");
  const Eigen::VectorXd evals = solver.eigenvalues();
  if (evals.minCoeff() <= 0.0)
    fail(ErrorKind::numeric, "covariance is singular; increase the whitening regularizer");
  const Eigen::MatrixXd& q = solver.eigenvectors();
  const Eigen::MatrixXd w =
      q * evals.array().rsqrt().matrix().asDiagonal() * q.transpose();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      model.transform(i, j) = 0.5 * (w(i, j) + w(j, i));
  return model;
}

inline Vector apply_whitening(const WhiteningModel& model, std::span<const double> x) {
  require_dims(x.size(), model.dim(), "whitening input");
  Vector centered(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) centered[i] = x[i] - model.mean[i];
  Vector out(x.size(), 0.0);
  gemv_add(model.transform, centered, out);
  return out;
}

inline nlohmann::json to_json(const WhiteningModel& m) {
  return {{"dim", m.dim()},
          {"mode", to_string(m.mode)},
          {"lambda", m.lambda},
          {"mean", codec::encode_f64_base64(m.mean)},
          {"transform", codec::encode_f64_base64(m.transform.values())}};
}

inline WhiteningModel whitening_from_json(const nlohmann::json& j) {
  try {
    WhiteningModel m;
    const auto d = j.at("dim").get<std::size_t>();
    m.mode = whitening_mode_from_string(j.at("mode").get<std::string>());
    m.lambda = j.at("lambda").get<double>();
    m.mean = codec::decode_f64_base64(j.at("mean").get<std::string>());
    require_dims(m.mean.size(), d, "whitening mean");
    m.transform = Matrix(d, d, codec::decode_f64_base64(j.at("transform").get<std::string>()));
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("whitening JSON: ") + e.what());
  }
}

}  // namespace swmt
