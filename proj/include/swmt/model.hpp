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

// Trainable networks.
//
// FrameEncoder: x -> relu(W_in x + b_in) -> relu(W_feat h + b_feat) = features,
// with linear phase and tool heads on the features. It is the per-frame stage.
//
// BiLstm: one LSTM layer run left-to-right and one right-to-left over a
// feature sequence; the two hidden states of each frame are concatenated and
// fed to linear phase and tool heads. Gate order inside every 4H block is
// (input, forget, cell, output).
//
// Parameter structs expose for_each_tensor(f) with f(name, span) so that the
// optimizer, checkpointing and gradient checks treat every network uniformly.
// A parameter struct doubles as its own gradient and velocity container.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "swmt/error.hpp"
#include "swmt/tensorcore.hpp"

namespace swmt {

template <class P>
P zeros_like(const P& params) {
  P out = params;
  out.for_each_tensor([](const std::string&, std::span<double> v) {
    std::fill(v.begin(), v.end(), 0.0);
  });
  return out;
}

template <class P>
std::size_t parameter_count(const P& params) {
  std::size_t n = 0;
  params.for_each_tensor([&](const std::string&, std::span<const double> v) { n += v.size(); });
  return n;
}

/// Flattened copy of every tensor in visitation order.
template <class P>
Vector flatten(const P& params) {
  Vector out;
  params.for_each_tensor([&](const std::string&, std::span<const double> v) {
    out.insert(out.end(), v.begin(), v.end());
  });
  return out;
}

inline void glorot_uniform(Matrix& w, SeededRng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& x : w.values()) x = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------------------
// Frame encoder

struct EncoderDims {
  std::size_t input = 64;    // D
  std::size_t hidden = 128;  // H_e
  std::size_t feature = 128; // F
  std::size_t phases = 7;    // N1
  std::size_t tools = 8;     // N2
  friend bool operator==(const EncoderDims&, const EncoderDims&) = default;
};

struct EncoderParams {
  Matrix w_in;
  Vector b_in;
  Matrix w_feat;
  Vector b_feat;
  Matrix w_phase;
  Vector b_phase;
  Matrix w_tool;
  Vector b_tool;

  EncoderParams() = default;
  explicit EncoderParams(const EncoderDims& d)
      : w_in(d.hidden, d.input), b_in(d.hidden, 0.0), w_feat(d.feature, d.hidden),
        b_feat(d.feature, 0.0), w_phase(d.phases, d.feature), b_phase(d.phases, 0.0),
        w_tool(d.tools, d.feature), b_tool(d.tools, 0.0) {}

  EncoderDims dims() const {
    return {w_in.cols(), w_in.rows(), w_feat.rows(), w_phase.rows(), w_tool.rows()};
  }

  template <class F>
  void for_each_tensor(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    visit(*this, f);
  }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;

 private:
  template <class Self, class F>
  static void visit(Self& s, F& f) {
    f("w_in", s.w_in.values());
    f("b_in", std::span(s.b_in));
    f("w_feat", s.w_feat.values());
    f("b_feat", std::span(s.b_feat));
    f("w_phase", s.w_phase.values());
    f("b_phase", std::span(s.b_phase));
    f("w_tool", s.w_tool.values());
    f("b_tool", std::span(s.b_tool));
  }
};

inline EncoderParams init_encoder(const EncoderDims& dims, SeededRng& rng) {
  if (dims.input == 0 || dims.hidden == 0 || dims.feature == 0 || dims.phases == 0 ||
      dims.tools == 0)
    fail(ErrorKind::invalid_argument, "encoder dimensions must be positive");
  EncoderParams p(dims);
  glorot_uniform(p.w_in, rng);
  glorot_uniform(p.w_feat, rng);
  glorot_uniform(p.w_phase, rng);
  glorot_uniform(p.w_tool, rng);
  return p;
}

struct EncoderCache {
  EncoderDims dims;
  Vector input;
  Vector hidden;    // post-relu
  Vector features;  // post-relu
};

struct EncoderOutput {
  Vector features;
  Vector phase_logits;
  Vector tool_logits;
  EncoderCache cache;
};

inline EncoderOutput encoder_forward(const EncoderParams& p, std::span<const double> x) {
  const EncoderDims d = p.dims();
  require_dims(x.size(), d.input, "encoder input");
  EncoderOutput out;
  Vector hidden = p.b_in;
  gemv_add(p.w_in, x, hidden);
  for (double& v : hidden) v = v > 0.0 ? v : 0.0;
  Vector feat = p.b_feat;
  gemv_add(p.w_feat, hidden, feat);
  for (double& v : feat) v = v > 0.0 ? v : 0.0;
  out.phase_logits = p.b_phase;
  gemv_add(p.w_phase, feat, out.phase_logits);
  out.tool_logits = p.b_tool;
  gemv_add(p.w_tool, feat, out.tool_logits);
  out.features = feat;
  out.cache = {d, Vector(x.begin(), x.end()), std::move(hidden), std::move(feat)};
  return out;
}

/// Adds the parameter gradients of a scalar loss into `grads`, given the
/// loss gradients with respect to both logit vectors.
inline void encoder_backward_accumulate(const EncoderParams& p, const EncoderCache& cache,
                                        std::span<const double> grad_phase,
                                        std::span<const double> grad_tool, EncoderParams& grads) {
  const EncoderDims d = p.dims();
  if (!(cache.dims == d) || cache.input.size() != d.input || cache.features.size() != d.feature ||
      cache.hidden.size() != d.hidden)
    fail(ErrorKind::mismatch, "encoder cache does not match the parameters");
  if (!(grads.dims() == d)) fail(ErrorKind::dimension, "encoder gradient buffer shape");
  require_dims(grad_phase.size(), d.phases, "phase logit gradient");
  require_dims(grad_tool.size(), d.tools, "tool logit gradient");

  outer_add(grads.w_phase, grad_phase, cache.features);
  outer_add(grads.w_tool, grad_tool, cache.features);
  for (std::size_t i = 0; i < d.phases; ++i) grads.b_phase[i] += grad_phase[i];
  for (std::size_t i = 0; i < d.tools; ++i) grads.b_tool[i] += grad_tool[i];

  Vector g_feat(d.feature, 0.0);
  gemv_t_add(p.w_phase, grad_phase, g_feat);
  gemv_t_add(p.w_tool, grad_tool, g_feat);
  for (std::size_t i = 0; i < d.feature; ++i)
    if (cache.features[i] <= 0.0) g_feat[i] = 0.0;
  outer_add(grads.w_feat, g_feat, cache.hidden);
  for (std::size_t i = 0; i < d.feature; ++i) grads.b_feat[i] += g_feat[i];

  Vector g_hidden(d.hidden, 0.0);
  gemv_t_add(p.w_feat, g_feat, g_hidden);
  for (std::size_t i = 0; i < d.hidden; ++i)
    if (cache.hidden[i] <= 0.0) g_hidden[i] = 0.0;
  outer_add(grads.w_in, g_hidden, cache.input);
  for (std::size_t i = 0; i < d.hidden; ++i) grads.b_in[i] += g_hidden[i];
}

inline EncoderParams encoder_backward(const EncoderParams& p, const EncoderCache& cache,
                                      std::span<const double> grad_phase,
                                      std::span<const double> grad_tool) {
  EncoderParams grads = zeros_like(p);
  encoder_backward_accumulate(p, cache, grad_phase, grad_tool, grads);
  return grads;
}

// ---------------------------------------------------------------------------
// Bidirectional LSTM

struct BiLstmDims {
  std::size_t input = 128;  // F
  std::size_t hidden = 64;  // H per direction
  std::size_t phases = 7;
  std::size_t tools = 8;
  friend bool operator==(const BiLstmDims&, const BiLstmDims&) = default;
};

struct LstmDirection {
  Matrix w;  // 4H x F
  Matrix u;  // 4H x H
  Vector b;  // 4H

  LstmDirection() = default;
  LstmDirection(std::size_t input, std::size_t hidden)
      : w(4 * hidden, input), u(4 * hidden, hidden), b(4 * hidden, 0.0) {}

  std::size_t hidden() const noexcept { return u.cols(); }
  friend bool operator==(const LstmDirection&, const LstmDirection&) = default;
};

struct BiLstmParams {
  LstmDirection fwd;
  LstmDirection bwd;
  Matrix w_phase;  // N1 x 2H
  Vector b_phase;
  Matrix w_tool;   // N2 x 2H
  Vector b_tool;

  BiLstmParams() = default;
  explicit BiLstmParams(const BiLstmDims& d)
      : fwd(d.input, d.hidden), bwd(d.input, d.hidden), w_phase(d.phases, 2 * d.hidden),
        b_phase(d.phases, 0.0), w_tool(d.tools, 2 * d.hidden), b_tool(d.tools, 0.0) {}

  BiLstmDims dims() const { return {fwd.w.cols(), fwd.hidden(), w_phase.rows(), w_tool.rows()}; }

  template <class F>
  void for_each_tensor(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    visit(*this, f);
  }

  friend bool operator==(const BiLstmParams&, const BiLstmParams&) = default;

 private:
  template <class Self, class F>
  static void visit(Self& s, F& f) {
    f("fwd.w", s.fwd.w.values());
    f("fwd.u", s.fwd.u.values());
    f("fwd.b", std::span(s.fwd.b));
    f("bwd.w", s.bwd.w.values());
    f("bwd.u", s.bwd.u.values());
    f("bwd.b", std::span(s.bwd.b));
    f("w_phase", s.w_phase.values());
    f("b_phase", std::span(s.b_phase));
    f("w_tool", s.w_tool.values());
    f("b_tool", std::span(s.b_tool));
  }
};

inline BiLstmParams init_bilstm(const BiLstmDims& dims, SeededRng& rng) {
  if (dims.input == 0 || dims.hidden == 0 || dims.phases == 0 || dims.tools == 0)
    fail(ErrorKind::invalid_argument, "Bi-LSTM dimensions must be positive");
  BiLstmParams p(dims);
  for (LstmDirection* dir : {&p.fwd, &p.bwd}) {
    glorot_uniform(dir->w, rng);
    glorot_uniform(dir->u, rng);
    for (std::size_t k = dims.hidden; k < 2 * dims.hidden; ++k) dir->b[k] = 1.0;
  }
  glorot_uniform(p.w_phase, rng);
  glorot_uniform(p.w_tool, rng);
  return p;
}

/// Per-direction activations, indexed by sequence position.
struct LstmTrace {
  Matrix gates;  // T x 4H, post-activation (i, f, g, o)
  Matrix cell;   // T x H
  Matrix hidden; // T x H
};

struct BiLstmCache {
  BiLstmDims dims;
  Matrix input;  // T x F
  LstmTrace fwd;
  LstmTrace bwd;
};

struct SequenceOutput {
  Matrix phase_logits;  // T x N1
  Matrix tool_logits;   // T x N2
  BiLstmCache cache;

  std::size_t length() const noexcept { return phase_logits.rows(); }
};

namespace detail {

// Runs one direction. `reverse` walks t = T-1 .. 0, so the recurrent
// predecessor of position t is t+1 instead of t-1.
inline LstmTrace lstm_direction_forward(const LstmDirection& dir, const Matrix& seq,
                                        bool reverse) {
  const std::size_t T = seq.rows(), H = dir.hidden();
  LstmTrace tr{Matrix(T, 4 * H), Matrix(T, H), Matrix(T, H)};
  Vector h_prev(H, 0.0), c_prev(H, 0.0), z(4 * H);
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? T - 1 - step : step;
    std::copy(dir.b.begin(), dir.b.end(), z.begin());
    gemv_add(dir.w, seq.row(t), z);
    gemv_add(dir.u, h_prev, z);
    auto gates = tr.gates.row(t);
    auto c = tr.cell.row(t);
    auto h = tr.hidden.row(t);
    for (std::size_t k = 0; k < H; ++k) {
      const double i = sigmoid(z[k]);
      const double f = sigmoid(z[H + k]);
      const double g = std::tanh(z[2 * H + k]);
      const double o = sigmoid(z[3 * H + k]);
      gates[k] = i;
      gates[H + k] = f;
      gates[2 * H + k] = g;
      gates[3 * H + k] = o;
      c[k] = f * c_prev[k] + i * g;
      h[k] = o * std::tanh(c[k]);
    }
    std::copy(h.begin(), h.end(), h_prev.begin());
    std::copy(c.begin(), c.end(), c_prev.begin());
  }
  return tr;
}

// grad_h is T x H: loss gradient flowing into each hidden state from the heads.
inline void lstm_direction_backward(const LstmDirection& dir, const Matrix& seq,
                                    const LstmTrace& tr, const Matrix& grad_h, bool reverse,
                                    LstmDirection& grads) {
  const std::size_t T = seq.rows(), H = dir.hidden();
  Vector dh_next(H, 0.0), dc_next(H, 0.0), dz(4 * H);
  const Vector zeros(H, 0.0);
  for (std::size_t step = 0; step < T; ++step) {
    const std::size_t t = reverse ? step : T - 1 - step;
    const bool first = reverse ? (t == T - 1) : (t == 0);
    const std::size_t prev = reverse ? t + 1 : t - 1;
    std::span<const double> c_prev = first ? std::span<const double>(zeros) : tr.cell.row(prev);
    std::span<const double> h_prev = first ? std::span<const double>(zeros) : tr.hidden.row(prev);
    const auto gates = tr.gates.row(t);
    const auto c = tr.cell.row(t);
    const auto gh = grad_h.row(t);
    for (std::size_t k = 0; k < H; ++k) {
      const double i = gates[k], f = gates[H + k], g = gates[2 * H + k], o = gates[3 * H + k];
      const double tc = std::tanh(c[k]);
      const double dh = gh[k] + dh_next[k];
      const double dc = dh * o * (1.0 - tc * tc) + dc_next[k];
      dz[k] = dc * g * i * (1.0 - i);
      dz[H + k] = dc * c_prev[k] * f * (1.0 - f);
      dz[2 * H + k] = dc * i * (1.0 - g * g);
      dz[3 * H + k] = dh * tc * o * (1.0 - o);
      dc_next[k] = dc * f;
    }
    outer_add(grads.w, dz, seq.row(t));
    outer_add(grads.u, dz, h_prev);
    for (std::size_t k = 0; k < 4 * H; ++k) grads.b[k] += dz[k];
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    gemv_t_add(dir.u, dz, dh_next);
  }
}

}  // namespace detail

inline SequenceOutput bilstm_forward(const BiLstmParams& p, const Matrix& seq) {
  const BiLstmDims d = p.dims();
  if (seq.rows() == 0) fail(ErrorKind::invalid_argument, "empty feature sequence");
  require_dims(seq.cols(), d.input, "Bi-LSTM input feature");
  const std::size_t T = seq.rows(), H = d.hidden;
  SequenceOutput out;
  out.cache.dims = d;
  out.cache.input = seq;
  out.cache.fwd = detail::lstm_direction_forward(p.fwd, seq, false);
  out.cache.bwd = detail::lstm_direction_forward(p.bwd, seq, true);
  out.phase_logits = Matrix(T, d.phases);
  out.tool_logits = Matrix(T, d.tools);
  Vector state(2 * H);
  for (std::size_t t = 0; t < T; ++t) {
    const auto hf = out.cache.fwd.hidden.row(t);
    const auto hb = out.cache.bwd.hidden.row(t);
    std::copy(hf.begin(), hf.end(), state.begin());
    std::copy(hb.begin(), hb.end(), state.begin() + H);
    auto pl = out.phase_logits.row(t);
    std::copy(p.b_phase.begin(), p.b_phase.end(), pl.begin());
    gemv_add(p.w_phase, state, pl);
    auto tl = out.tool_logits.row(t);
    std::copy(p.b_tool.begin(), p.b_tool.end(), tl.begin());
    gemv_add(p.w_tool, state, tl);
  }
  return out;
}

/// Full BPTT. grad_phase is T x N1 and grad_tool is T x N2.
inline void bilstm_backward_accumulate(const BiLstmParams& p, const BiLstmCache& cache,
                                       const Matrix& grad_phase, const Matrix& grad_tool,
                                       BiLstmParams& grads) {
  const BiLstmDims d = p.dims();
  const std::size_t T = cache.input.rows(), H = d.hidden;
  if (!(cache.dims == d) || cache.fwd.hidden.rows() != T || cache.bwd.hidden.rows() != T)
    fail(ErrorKind::mismatch, "Bi-LSTM cache does not match the parameters");
  if (!(grads.dims() == d)) fail(ErrorKind::dimension, "Bi-LSTM gradient buffer shape");
  if (grad_phase.rows() != T || grad_phase.cols() != d.phases || grad_tool.rows() != T ||
      grad_tool.cols() != d.tools)
    fail(ErrorKind::dimension, "per-frame logit gradients do not match the sequence");

  Matrix gh_fwd(T, H), gh_bwd(T, H);
  Vector state(2 * H), g_state(2 * H);
  for (std::size_t t = 0; t < T; ++t) {
    const auto hf = cache.fwd.hidden.row(t);
    const auto hb = cache.bwd.hidden.row(t);
    std::copy(hf.begin(), hf.end(), state.begin());
    std::copy(hb.begin(), hb.end(), state.begin() + H);
    const auto gp = grad_phase.row(t);
    const auto gt = grad_tool.row(t);
    outer_add(grads.w_phase, gp, state);
    outer_add(grads.w_tool, gt, state);
    for (std::size_t i = 0; i < d.phases; ++i) grads.b_phase[i] += gp[i];
    for (std::size_t i = 0; i < d.tools; ++i) grads.b_tool[i] += gt[i];
    std::fill(g_state.begin(), g_state.end(), 0.0);
    gemv_t_add(p.w_phase, gp, g_state);
    gemv_t_add(p.w_tool, gt, g_state);
    std::copy(g_state.begin(), g_state.begin() + H, gh_fwd.row(t).begin());
    std::copy(g_state.begin() + H, g_state.end(), gh_bwd.row(t).begin());
  }
  detail::lstm_direction_backward(p.fwd, cache.input, cache.fwd, gh_fwd, false, grads.fwd);
  detail::lstm_direction_backward(p.bwd, cache.input, cache.bwd, gh_bwd, true, grads.bwd);
}

inline BiLstmParams bilstm_backward(const BiLstmParams& p, const BiLstmCache& cache,
                                    const Matrix& grad_phase, const Matrix& grad_tool) {
  BiLstmParams grads = zeros_like(p);
  bilstm_backward_accumulate(p, cache, grad_phase, grad_tool, grads);
  return grads;
}

}  // namespace swmt
