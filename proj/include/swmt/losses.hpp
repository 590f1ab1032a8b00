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

// The three per-frame training losses with analytic gradients with respect to
// the logits:
//   phase_loss  weighted cross-entropy over the single-label phase logits
//   tool_loss   weighted multi-label soft-margin loss over the tool logits
//   joint_loss  co-occurrence penalty sum_t sum_p x_phase[p] x_tool[t] IF[t][p]
// and their weighted sum.

#include <cmath>
#include <optional>
#include <span>

#include "swmt/error.hpp"
#include "swmt/stats.hpp"
#include "swmt/tensorcore.hpp"

namespace swmt {

/// One-hot phase ground truth, stored as the index of its 1.
class PhaseTarget {
 public:
  PhaseTarget(std::size_t n_classes, std::size_t index) : n_(n_classes), index_(index) {
    if (index >= n_classes) fail(ErrorKind::invalid_argument, "phase target out of range");
  }

  static PhaseTarget from_one_hot(std::span<const double> one_hot) {
    std::size_t ones = 0, at = 0;
    for (std::size_t i = 0; i < one_hot.size(); ++i) {
      if (one_hot[i] == 1.0) {
        ++ones;
        at = i;
      } else if (one_hot[i] != 0.0) {
        fail(ErrorKind::invalid_argument, "one-hot entry is not 0 or 1");
      }
    }
    if (ones != 1) fail(ErrorKind::invalid_argument, "one-hot target must contain exactly one 1");
    return PhaseTarget(one_hot.size(), at);
  }

  std::size_t size() const noexcept { return n_; }
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t n_;
  std::size_t index_;
};

struct LossResult {
  double value = 0.0;
  std::optional<Vector> grad_phase;
  std::optional<Vector> grad_tool;
};

struct MultitaskWeights {
  double phase = 1.0;  // L1
  double tool = 1.0;   // L2
  double joint = 1.0;  // L3

  bool valid() const noexcept {
    return phase >= 0.0 && tool >= 0.0 && joint >= 0.0 && (phase + tool + joint) > 0.0;
  }
};

/// Which activation each head receives inside joint_loss. `as_written` pairs a
/// sigmoid with the phase logits and a softmax with the tool logits; `swapped`
/// is the other assignment.
enum class JointActivation { as_written, swapped };

inline LossResult phase_loss(std::span<const double> logits, const PhaseTarget& target,
                             const ClassWeights& w1) {
  require_dims(target.size(), logits.size(), "phase target");
  require_dims(w1.size(), logits.size(), "phase weights");
  const std::size_t c = target.index();
  const double w = w1[c];
  LossResult r;
  r.value = w * (log_sum_exp(logits) - logits[c]);
  Vector g = softmax(logits);
  g[c] -= 1.0;
  for (double& x : g) x *= w;
  r.grad_phase = std::move(g);
  return r;
}

inline LossResult tool_loss(std::span<const double> logits, std::span<const double> target,
                            const ClassWeights& w2) {
  require_dims(target.size(), logits.size(), "tool target");
  require_dims(w2.size(), logits.size(), "tool weights");
  LossResult r;
  Vector g(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = target[i];
    if (y != 0.0 && y != 1.0) fail(ErrorKind::invalid_argument, "tool target is not binary");
    // -[y log s(z) + (1-y) log(1-s(z))] = max(z,0) - z y + log(1 + e^-|z|)
    r.value += w2[i] * (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))));
    g[i] = w2[i] * (sigmoid(z) - y);
  }
  r.grad_tool = std::move(g);
  return r;
}

inline LossResult joint_loss(std::span<const double> phase_logits,
                             std::span<const double> tool_logits, const CooccurrenceModel& co,
                             JointActivation activation = JointActivation::as_written) {
  require_dims(phase_logits.size(), co.n_phases(), "joint-loss phase logits");
  require_dims(tool_logits.size(), co.n_tools(), "joint-loss tool logits");
  const std::size_t np = co.n_phases(), nt = co.n_tools();
  const Matrix& inv = co.inverse_frequency();
  const bool as_written = activation == JointActivation::as_written;

  const Vector xp = as_written ? sigmoid(phase_logits) : softmax(phase_logits);
  const Vector xt = as_written ? softmax(tool_logits) : sigmoid(tool_logits);

  // a[p] = sum_t xt[t] IF[t][p];  b[t] = sum_p xp[p] IF[t][p]
  Vector a(np, 0.0), b(nt, 0.0);
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t p = 0; p < np; ++p) {
      a[p] += xt[t] * inv(t, p);
      b[t] += xp[p] * inv(t, p);
    }

  LossResult r;
  for (std::size_t p = 0; p < np; ++p) r.value += xp[p] * a[p];

  Vector gp(np), gt(nt);
  if (as_written) {
    for (std::size_t p = 0; p < np; ++p) gp[p] = xp[p] * (1.0 - xp[p]) * a[p];
    double mean_b = 0.0;
    for (std::size_t t = 0; t < nt; ++t) mean_b += xt[t] * b[t];
    for (std::size_t t = 0; t < nt; ++t) gt[t] = xt[t] * (b[t] - mean_b);
  } else {
    double mean_a = 0.0;
    for (std::size_t p = 0; p < np; ++p) mean_a += xp[p] * a[p];
    for (std::size_t p = 0; p < np; ++p) gp[p] = xp[p] * (a[p] - mean_a);
    for (std::size_t t = 0; t < nt; ++t) gt[t] = xt[t] * (1.0 - xt[t]) * b[t];
  }
  r.grad_phase = std::move(gp);
  r.grad_tool = std::move(gt);
  return r;
}

/// alphas.phase * L1 + alphas.tool * L2 + alphas.joint * L3. Terms with a zero
/// weight are not evaluated, so their gradients are exactly zero.
inline LossResult multitask_loss(std::span<const double> phase_logits,
                                 std::span<const double> tool_logits,
                                 const PhaseTarget& phase_target,
                                 std::span<const double> tool_target, const ClassWeights& w1,
                                 const ClassWeights& w2, const CooccurrenceModel& co,
                                 const MultitaskWeights& alphas,
                                 JointActivation activation = JointActivation::as_written) {
  if (!alphas.valid()) fail(ErrorKind::invalid_argument, "loss weights must be >= 0, not all 0");
  LossResult r;
  Vector gp(phase_logits.size(), 0.0), gt(tool_logits.size(), 0.0);
  auto add = [](Vector& acc, const Vector& g, double alpha) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += alpha * g[i];
  };
  if (alphas.phase != 0.0) {
    const LossResult l1 = phase_loss(phase_logits, phase_target, w1);
    r.value += alphas.phase * l1.value;
    add(gp, *l1.grad_phase, alphas.phase);
  }
  if (alphas.tool != 0.0) {
    const LossResult l2 = tool_loss(tool_logits, tool_target, w2);
    r.value += alphas.tool * l2.value;
    add(gt, *l2.grad_tool, alphas.tool);
  }
  if (alphas.joint != 0.0) {
    const LossResult l3 = joint_loss(phase_logits, tool_logits, co, activation);
    r.value += alphas.joint * l3.value;
    add(gp, *l3.grad_phase, alphas.joint);
    add(gt, *l3.grad_tool, alphas.joint);
  }
  r.grad_phase = std::move(gp);
  r.grad_tool = std::move(gt);
  return r;
}

}  // namespace swmt
