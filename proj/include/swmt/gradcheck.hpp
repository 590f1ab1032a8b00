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

// Central finite-difference checks for every hand-written gradient.
//
// Each component runs `trials` random draws. The loss components draw logits
// uniformly from [-5, 5] and compare the analytic gradient on every logit. The
// network components reduce their outputs to a scalar with a random linear
// probe and compare every parameter gradient. Encoder coordinates whose
// perturbation flips a relu are skipped, since the derivative is undefined
// there.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "swmt/labels.hpp"
#include "swmt/losses.hpp"
#include "swmt/model.hpp"
#include "swmt/stats.hpp"
#include "swmt/tensorcore.hpp"

namespace swmt {

struct GradcheckOptions {
  int trials = 100;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 42;
  bool flip_sign = false;  // test hook: negates every analytic gradient
};

struct ComponentCheck {
  std::string name;
  int trials = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double worst_rel_error = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<ComponentCheck> components;
  double tolerance = 0.0;

  bool passed() const {
    return std::all_of(components.begin(), components.end(),
                       [](const ComponentCheck& c) { return c.passed; });
  }
  double worst() const {
    double w = 0.0;
    for (const auto& c : components) w = std::max(w, c.worst_rel_error);
    return w;
  }
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

namespace detail {

class CheckAccumulator {
 public:
  CheckAccumulator(std::string name, const GradcheckOptions& o) : opt_(o) { r_.name = std::move(name); }

  void compare(double analytic, double numeric) {
    if (opt_.flip_sign) analytic = -analytic;
    r_.worst_rel_error = std::max(r_.worst_rel_error, relative_error(analytic, numeric));
    ++r_.checked;
  }
  void skip() { ++r_.skipped; }

  ComponentCheck finish(int trials) {
    r_.trials = trials;
    r_.passed = r_.checked > 0 && r_.worst_rel_error < opt_.tolerance;
    return r_;
  }

 private:
  GradcheckOptions opt_;
  ComponentCheck r_;
};

/// Numeric d f / d x[i] by central differences; restores x[i].
inline double central_difference(const std::function<double()>& f, double& xi, double h) {
  const double saved = xi;
  xi = saved + h;
  const double up = f();
  xi = saved - h;
  const double down = f();
  xi = saved;
  return (up - down) / (2.0 * h);
}

inline Vector random_vector(std::size_t n, SeededRng& rng, double sd = 1.0) {
  Vector v(n);
  for (double& x : v) x = rng.normal(0.0, sd);
  return v;
}

inline Vector uniform_vector(std::size_t n, SeededRng& rng, double bound) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return v;
}

inline ClassWeights random_weights(std::size_t n, SeededRng& rng) {
  ClassWeights w;
  w.w.resize(n);
  for (double& x : w.w) x = rng.uniform(0.2, 3.0);
  return w;
}

inline Vector random_tool_target(SeededRng& rng) {
  FrameLabel l;
  std::uint8_t bits = 0;
  for (std::size_t k = 0; k < kNumPhysicalTools; ++k)
    if (rng.uniform() < 0.25 && static_cast<std::size_t>(std::popcount(bits)) < kMaxToolsPerFrame) bits |= 1u << k;
  l = FrameLabel::from_physical(0, bits);
  return l.tool_multi_hot();
}

// Counts in 0..9 with a large-ish epsilon so every IF entry stays moderate;
// zero cells are still present.
inline CooccurrenceModel random_cooccurrence(SeededRng& rng) {
  std::vector<std::uint64_t> counts(kNumTools * kNumPhases);
  for (auto& c : counts) c = rng.below(10);
  return CooccurrenceModel(kNumTools, kNumPhases, counts, 1e-2);
}

inline bool relu_pattern_equal(const EncoderCache& a, const EncoderCache& b) {
  for (std::size_t i = 0; i < a.hidden.size(); ++i)
    if ((a.hidden[i] > 0.0) != (b.hidden[i] > 0.0)) return false;
  for (std::size_t i = 0; i < a.features.size(); ++i)
    if ((a.features[i] > 0.0) != (b.features[i] > 0.0)) return false;
  return true;
}

template <class LossFn>
ComponentCheck check_logit_loss(const std::string& name, const GradcheckOptions& opt,
                                std::uint64_t stream, LossFn&& make_case) {
  CheckAccumulator acc(name, opt);
  SeededRng rng = SeededRng::child(opt.seed, stream);
  for (int trial = 0; trial < opt.trials; ++trial) {
    Vector pl = uniform_vector(kNumPhases, rng, 5.0);
    Vector tl = uniform_vector(kNumTools, rng, 5.0);
    auto loss = make_case(rng);
    const LossResult r = loss(pl, tl);
    auto value = [&] { return loss(pl, tl).value; };
    if (r.grad_phase)
      for (std::size_t i = 0; i < pl.size(); ++i)
        acc.compare((*r.grad_phase)[i], central_difference(value, pl[i], opt.step));
    if (r.grad_tool)
      for (std::size_t i = 0; i < tl.size(); ++i)
        acc.compare((*r.grad_tool)[i], central_difference(value, tl[i], opt.step));
  }
  return acc.finish(opt.trials);
}

}  // namespace detail

inline ComponentCheck gradcheck_phase_loss(const GradcheckOptions& opt) {
  return detail::check_logit_loss("phase_loss", opt, 11, [](SeededRng& rng) {
    const PhaseTarget target(kNumPhases, rng.below(kNumPhases));
    const ClassWeights w = detail::random_weights(kNumPhases, rng);
    return [target, w](const Vector& pl, const Vector&) { return phase_loss(pl, target, w); };
  });
}

inline ComponentCheck gradcheck_tool_loss(const GradcheckOptions& opt) {
  return detail::check_logit_loss("tool_loss", opt, 12, [](SeededRng& rng) {
    const Vector target = detail::random_tool_target(rng);
    const ClassWeights w = detail::random_weights(kNumTools, rng);
    return [target, w](const Vector&, const Vector& tl) { return tool_loss(tl, target, w); };
  });
}

inline ComponentCheck gradcheck_joint_loss(const GradcheckOptions& opt, JointActivation act) {
  const std::string name = act == JointActivation::as_written ? "joint_loss" : "joint_loss[swapped]";
  return detail::check_logit_loss(name, opt, act == JointActivation::as_written ? 13 : 14,
                                  [act](SeededRng& rng) {
                                    const CooccurrenceModel co = detail::random_cooccurrence(rng);
                                    return [co, act](const Vector& pl, const Vector& tl) {
                                      return joint_loss(pl, tl, co, act);
                                    };
                                  });
}

inline ComponentCheck gradcheck_multitask_loss(const GradcheckOptions& opt) {
  return detail::check_logit_loss("multitask_loss", opt, 15, [](SeededRng& rng) {
    const PhaseTarget pt(kNumPhases, rng.below(kNumPhases));
    const Vector tt = detail::random_tool_target(rng);
    const ClassWeights w1 = detail::random_weights(kNumPhases, rng);
    const ClassWeights w2 = detail::random_weights(kNumTools, rng);
    const CooccurrenceModel co = detail::random_cooccurrence(rng);
    const MultitaskWeights alphas{rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)};
    return [=](const Vector& pl, const Vector& tl) {
      return multitask_loss(pl, tl, pt, tt, w1, w2, co, alphas);
    };
  });
}

inline ComponentCheck gradcheck_encoder(const GradcheckOptions& opt) {
  detail::CheckAccumulator acc("encoder_backward", opt);
  SeededRng rng = SeededRng::child(opt.seed, 16);
  const EncoderDims dims{3, 4, 4, kNumPhases, kNumTools};
  for (int trial = 0; trial < opt.trials; ++trial) {
    EncoderParams p = init_encoder(dims, rng);
    p.for_each_tensor([&](const std::string&, std::span<double> v) {
      for (double& x : v) x += rng.normal(0.0, 0.3);
    });
    const Vector x = detail::random_vector(dims.input, rng);
    const Vector probe_p = detail::random_vector(dims.phases, rng);
    const Vector probe_t = detail::random_vector(dims.tools, rng);
    auto scalar = [&](const EncoderOutput& o) {
      double s = 0.0;
      for (std::size_t i = 0; i < o.phase_logits.size(); ++i) s += probe_p[i] * o.phase_logits[i];
      for (std::size_t i = 0; i < o.tool_logits.size(); ++i) s += probe_t[i] * o.tool_logits[i];
      return s;
    };
    const EncoderOutput base = encoder_forward(p, x);
    const EncoderParams grads = encoder_backward(p, base.cache, probe_p, probe_t);
    const Vector analytic = flatten(grads);

    std::size_t k = 0;
    p.for_each_tensor([&](const std::string&, std::span<double> v) {
      for (double& xi : v) {
        const double saved = xi;
        xi = saved + opt.step;
        const EncoderOutput up = encoder_forward(p, x);
        xi = saved - opt.step;
        const EncoderOutput down = encoder_forward(p, x);
        xi = saved;
        if (detail::relu_pattern_equal(base.cache, up.cache) &&
            detail::relu_pattern_equal(base.cache, down.cache))
          acc.compare(analytic[k], (scalar(up) - scalar(down)) / (2.0 * opt.step));
        else
          acc.skip();
        ++k;
      }
    });
  }
  return acc.finish(opt.trials);
}

inline ComponentCheck gradcheck_bilstm(const GradcheckOptions& opt) {
  detail::CheckAccumulator acc("bilstm_backward", opt);
  SeededRng rng = SeededRng::child(opt.seed, 17);
  const BiLstmDims dims{3, 4, kNumPhases, kNumTools};
  const std::size_t T = 5;
  for (int trial = 0; trial < opt.trials; ++trial) {
    BiLstmParams p = init_bilstm(dims, rng);
    p.for_each_tensor([&](const std::string&, std::span<double> v) {
      for (double& x : v) x += rng.normal(0.0, 0.3);
    });
    Matrix seq(T, dims.input);
    for (double& x : seq.values()) x = rng.normal();
    Matrix probe_p(T, dims.phases), probe_t(T, dims.tools);
    for (double& x : probe_p.values()) x = rng.normal();
    for (double& x : probe_t.values()) x = rng.normal();
    auto value = [&] {
      const SequenceOutput o = bilstm_forward(p, seq);
      double s = 0.0;
      for (std::size_t i = 0; i < probe_p.size(); ++i) s += probe_p.values()[i] * o.phase_logits.values()[i];
      for (std::size_t i = 0; i < probe_t.size(); ++i) s += probe_t.values()[i] * o.tool_logits.values()[i];
      return s;
    };
    const SequenceOutput base = bilstm_forward(p, seq);
    const Vector analytic = flatten(bilstm_backward(p, base.cache, probe_p, probe_t));
    std::size_t k = 0;
    p.for_each_tensor([&](const std::string&, std::span<double> v) {
      for (double& xi : v) acc.compare(analytic[k++], detail::central_difference(value, xi, opt.step));
    });
  }
  return acc.finish(opt.trials);
}

inline GradcheckReport run_gradcheck(const GradcheckOptions& opt = {}) {
  GradcheckReport r;
  r.tolerance = opt.tolerance;
  r.components.push_back(gradcheck_phase_loss(opt));
  r.components.push_back(gradcheck_tool_loss(opt));
  r.components.push_back(gradcheck_joint_loss(opt, JointActivation::as_written));
  r.components.push_back(gradcheck_joint_loss(opt, JointActivation::swapped));
  r.components.push_back(gradcheck_multitask_loss(opt));
  r.components.push_back(gradcheck_encoder(opt));
  r.components.push_back(gradcheck_bilstm(opt));
  return r;
}

}  // namespace swmt
