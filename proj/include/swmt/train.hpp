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

// Optimization and the two-stage training protocol.
//
// Stage 1 trains the frame encoder on shuffled frame mini-batches. Its
// features are then extracted for every video, whitened with statistics of the
// training split, and stage 2 trains the Bi-LSTM one video per step. Both
// stages use SGD with momentum and coupled weight decay and a plateau
// scheduler driven by the held-out loss.
//
// The whole run is a resumable state machine (PipelineState): every epoch
// boundary is a checkpointable position, and resuming from it reproduces the
// uninterrupted run bit for bit.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swmt/data.hpp"
#include "swmt/error.hpp"
#include "swmt/evalkit.hpp"
#include "swmt/losses.hpp"
#include "swmt/model.hpp"
#include "swmt/stats.hpp"
#include "swmt/tensorcore.hpp"

namespace swmt {

struct SgdConfig {
  double lr = 1e-4;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// v <- momentum * v + grad + weight_decay * param;  param <- param - lr * v
template <class P>
void sgd_step(P& params, const P& grads, P& velocity, const SgdConfig& cfg) {
  std::vector<std::span<double>> ps, vs;
  std::vector<std::span<const double>> gs;
  params.for_each_tensor([&](const std::string&, std::span<double> s) { ps.push_back(s); });
  velocity.for_each_tensor([&](const std::string&, std::span<double> s) { vs.push_back(s); });
  grads.for_each_tensor([&](const std::string&, std::span<const double> s) { gs.push_back(s); });
  if (ps.size() != gs.size() || ps.size() != vs.size())
    fail(ErrorKind::dimension, "sgd_step: tensor count mismatch");
  for (std::size_t k = 0; k < ps.size(); ++k) {
    if (ps[k].size() != gs[k].size() || ps[k].size() != vs[k].size())
      fail(ErrorKind::dimension, "sgd_step: tensor shape mismatch");
    double* p = ps[k].data();
    double* v = vs[k].data();
    const double* g = gs[k].data();
    for (std::size_t i = 0; i < ps[k].size(); ++i) {
      v[i] = cfg.momentum * v[i] + g[i] + cfg.weight_decay * p[i];
      p[i] -= cfg.lr * v[i];
    }
  }
}

/// Multiplies the learning rate by `factor` once the monitored loss has gone
/// more than `patience` epochs without beating its best value.
struct PlateauScheduler {
  double factor = 0.9;
  int patience = 5;
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;

  double step(double val_loss, double lr) {
    if (val_loss < best_val) {
      best_val = val_loss;
      epochs_since_improvement = 0;
      return lr;
    }
    ++epochs_since_improvement;
    if (epochs_since_improvement > patience) {
      epochs_since_improvement = 0;
      return lr * factor;
    }
    return lr;
  }
};

/// Rescales `grads` so their global L2 norm is at most `max_norm` (0 disables).
/// Returns the norm before rescaling.
template <class P>
double clip_gradient_norm(P& grads, double max_norm) {
  double sq = 0.0;
  grads.for_each_tensor([&](const std::string&, std::span<const double> g) {
    for (double x : g) sq += x * x;
  });
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    grads.for_each_tensor([&](const std::string&, std::span<double> g) {
      for (double& x : g) x *= scale;
    });
  }
  return norm;
}

inline double scheduler_step(PlateauScheduler& s, double val_loss, double lr) {
  return s.step(val_loss, lr);
}

// ---------------------------------------------------------------------------
// Configuration

enum class Ablation { BL1, BL2, BL3, BL4, BL5, proposed };

inline const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::BL1: return "BL1";
    case Ablation::BL2: return "BL2";
    case Ablation::BL3: return "BL3";
    case Ablation::BL4: return "BL4";
    case Ablation::BL5: return "BL5";
    case Ablation::proposed: return "proposed";
  }
  return "?";
}

inline Ablation ablation_from_string(std::string_view s) {
  for (Ablation a : {Ablation::BL1, Ablation::BL2, Ablation::BL3, Ablation::BL4, Ablation::BL5,
                     Ablation::proposed})
    if (s == to_string(a)) return a;
  fail(ErrorKind::config, "unknown ablation '" + std::string(s) + "'");
}

inline bool has_stage2(Ablation a) {
  return a == Ablation::BL2 || a == Ablation::BL4 || a == Ablation::proposed;
}

/// Loss weights actually used by an ablation: tool-only runs zero L1 and L3,
/// phase-only runs zero L2 and L3. Both stages of one ablation share them.
inline MultitaskWeights effective_alphas(Ablation a, const MultitaskWeights& base) {
  switch (a) {
    case Ablation::BL1:
    case Ablation::BL2: return {0.0, base.tool, 0.0};
    case Ablation::BL3:
    case Ablation::BL4: return {base.phase, 0.0, 0.0};
    case Ablation::BL5:
    case Ablation::proposed: return base;
  }
  return base;
}

struct StageConfig {
  int epochs = 200;
  SgdConfig sgd;
  double plateau_factor = 0.9;
  int patience = 5;
  std::size_t batch = 100;  // frames (stage 1); stage 2 always steps once per video
  double clip_norm = 10.0;  // global gradient-norm cap per step; 0 disables
};

struct PipelineConfig {
  StageConfig stage1{200, {1e-4, 0.9, 5e-4}, 0.9, 5, 100, 10.0};
  StageConfig stage2{1000, {1e-2, 0.9, 5e-4}, 0.5, 5, 1, 10.0};
  std::size_t encoder_hidden = 128;
  std::size_t feature_dim = 128;
  std::size_t lstm_hidden = 64;
  MultitaskWeights alphas;
  JointActivation joint_activation = JointActivation::as_written;
  double epsilon = kDefaultEpsilon;
  bool strict_epsilon = false;
  WhiteningMode whitening_mode = WhiteningMode::zca;
  double whitening_lambda = 1e-5;
  Ablation ablation = Ablation::proposed;
  std::uint64_t seed = 42;

  double effective_epsilon() const { return strict_epsilon ? kStrictEpsilon : epsilon; }

  void validate() const {
    for (const StageConfig* s : {&stage1, &stage2}) {
      if (s->epochs <= 0) fail(ErrorKind::config, "epochs must be positive");
      if (!(s->sgd.lr > 0.0)) fail(ErrorKind::config, "learning rate must be positive");
      if (!(s->sgd.momentum >= 0.0 && s->sgd.momentum < 1.0))
        fail(ErrorKind::config, "momentum must lie in [0,1)");
      if (!(s->sgd.weight_decay >= 0.0)) fail(ErrorKind::config, "weight decay must be >= 0");
      if (!(s->plateau_factor > 0.0 && s->plateau_factor < 1.0))
        fail(ErrorKind::config, "plateau factor must lie in (0,1)");
      if (s->patience <= 0) fail(ErrorKind::config, "patience must be positive");
      if (s->batch == 0) fail(ErrorKind::config, "batch size must be positive");
      if (!(s->clip_norm >= 0.0)) fail(ErrorKind::config, "clip norm must be >= 0");
    }
    if (encoder_hidden == 0 || feature_dim == 0 || lstm_hidden == 0)
      fail(ErrorKind::config, "network sizes must be positive");
    if (!alphas.valid()) fail(ErrorKind::config, "loss weights must be >= 0 and not all 0");
    if (!(epsilon > 0.0)) fail(ErrorKind::config, "epsilon must be positive");
    if (!(whitening_lambda >= 0.0)) fail(ErrorKind::config, "whitening lambda must be >= 0");
  }
};

inline nlohmann::json to_json(const StageConfig& s) {
  return {{"epochs", s.epochs},
          {"lr", s.sgd.lr},
          {"momentum", s.sgd.momentum},
          {"weight_decay", s.sgd.weight_decay},
          {"plateau_factor", s.plateau_factor},
          {"patience", s.patience},
          {"batch", s.batch},
          {"clip_norm", s.clip_norm}};
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {{"stage1", to_json(c.stage1)},
          {"stage2", to_json(c.stage2)},
          {"model",
           {{"encoder_hidden", c.encoder_hidden},
            {"feature_dim", c.feature_dim},
            {"lstm_hidden", c.lstm_hidden}}},
          {"loss",
           {{"alpha_phase", c.alphas.phase},
            {"alpha_tool", c.alphas.tool},
            {"alpha_joint", c.alphas.joint},
            {"joint_loss_swap_activations", c.joint_activation == JointActivation::swapped},
            {"epsilon", c.epsilon},
            {"strict_epsilon", c.strict_epsilon}}},
          {"whitening", {{"mode", to_string(c.whitening_mode)}, {"lambda", c.whitening_lambda}}},
          {"ablation", to_string(c.ablation)},
          {"seed", c.seed}};
}

// ---------------------------------------------------------------------------
// Training statistics and data views

struct TrainingStats {
  ClassWeights phase_weights;
  ClassWeights tool_weights;
  CooccurrenceModel cooccurrence;
};

struct SplitView {
  std::vector<const VideoAnnotation*> train;
  std::vector<const VideoAnnotation*> test;
};

inline SplitView make_split_view(const Dataset& ds, const Split& split) {
  SplitView v;
  for (const auto& id : split.train) v.train.push_back(&ds.find(id));
  for (const auto& id : split.test) v.test.push_back(&ds.find(id));
  return v;
}

inline std::vector<FrameLabel> collect_labels(std::span<const VideoAnnotation* const> videos) {
  std::vector<FrameLabel> out;
  for (const auto* v : videos) out.insert(out.end(), v->labels.begin(), v->labels.end());
  return out;
}

/// Class weights and co-occurrence from the training split only.
inline TrainingStats compute_training_stats(std::span<const VideoAnnotation* const> train,
                                            double epsilon) {
  const auto labels = collect_labels(train);
  return {compute_class_weights(phase_frequencies(labels)),
          compute_class_weights(tool_frequencies(labels)), build_cooccurrence(labels, epsilon)};
}

// ---------------------------------------------------------------------------
// Pipeline state

enum class Stage { stage1, stage2, done };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::stage1: return "stage1";
    case Stage::stage2: return "stage2";
    case Stage::done: return "done";
  }
  return "?";
}

inline Stage stage_from_string(std::string_view s) {
  if (s == "stage1") return Stage::stage1;
  if (s == "stage2") return Stage::stage2;
  if (s == "done") return Stage::done;
  fail(ErrorKind::corruption, "unknown stage '" + std::string(s) + "'");
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // learning rate used during the epoch
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct PipelineState {
  Stage stage = Stage::stage1;
  int epoch = 0;  // epochs completed in the current stage
  double lr = 0.0;
  PlateauScheduler scheduler;
  SeededRng rng;
  EncoderParams encoder;
  EncoderParams encoder_velocity;
  std::optional<WhiteningModel> whitening;
  std::optional<BiLstmParams> lstm;
  std::optional<BiLstmParams> lstm_velocity;
  std::vector<EpochRecord> history1;
  std::vector<EpochRecord> history2;
};

inline PipelineState init_pipeline(const PipelineConfig& cfg, std::size_t input_dim) {
  cfg.validate();
  PipelineState s;
  SeededRng init_rng = SeededRng::child(cfg.seed, 1);
  s.encoder = init_encoder({input_dim, cfg.encoder_hidden, cfg.feature_dim, kNumPhases, kNumTools},
                           init_rng);
  s.encoder_velocity = zeros_like(s.encoder);
  s.lr = cfg.stage1.sgd.lr;
  s.scheduler = {cfg.stage1.plateau_factor, cfg.stage1.patience};
  s.rng = SeededRng::child(cfg.seed, 3);
  return s;
}

namespace detail {

struct FrameTargets {
  PhaseTarget phase;
  Vector tools;
};

inline FrameTargets targets_of(const FrameLabel& l) {
  return {PhaseTarget(kNumPhases, l.phase), l.tool_multi_hot()};
}

inline void check_finite_loss(double v, const char* where) {
  if (!std::isfinite(v))
    fail(ErrorKind::divergence, std::string(where) + ": loss became non-finite");
}

inline void require_features(const VideoAnnotation& v, std::size_t dim) {
  if (!v.features) fail(ErrorKind::mismatch, v.video_id + ": video has no features");
  if (v.features->cols() != dim)
    fail(ErrorKind::mismatch, v.video_id + ": feature dimension " +
                                  std::to_string(v.features->cols()) + " != model input " +
                                  std::to_string(dim));
}

}  // namespace detail

/// Mean multitask loss of the encoder over every frame of `videos`.
inline double encoder_mean_loss(const EncoderParams& enc,
                                std::span<const VideoAnnotation* const> videos,
                                const TrainingStats& st, const MultitaskWeights& alphas,
                                JointActivation act) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto* v : videos) {
    detail::require_features(*v, enc.dims().input);
    for (std::size_t t = 0; t < v->length(); ++t) {
      const auto out = encoder_forward(enc, v->features->row(t));
      const auto tg = detail::targets_of(v->labels[t]);
      sum += multitask_loss(out.phase_logits, out.tool_logits, tg.phase, tg.tools,
                            st.phase_weights, st.tool_weights, st.cooccurrence, alphas, act)
                 .value;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

/// One stage-1 epoch: shuffled frames without replacement, mean loss per batch.
inline EpochRecord stage1_epoch(PipelineState& s, const SplitView& data, const TrainingStats& st,
                                const PipelineConfig& cfg) {
  const MultitaskWeights alphas = effective_alphas(cfg.ablation, cfg.alphas);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> frames;
  for (std::size_t v = 0; v < data.train.size(); ++v) {
    detail::require_features(*data.train[v], s.encoder.dims().input);
    for (std::size_t t = 0; t < data.train[v]->length(); ++t)
      frames.emplace_back(static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(t));
  }
  if (frames.empty()) fail(ErrorKind::invalid_argument, "empty training split");
  s.rng.shuffle(frames);

  EpochRecord rec;
  rec.epoch = s.epoch + 1;
  rec.lr = s.lr;
  const SgdConfig sgd{s.lr, cfg.stage1.sgd.momentum, cfg.stage1.sgd.weight_decay};
  EncoderParams grads = zeros_like(s.encoder);
  double loss_sum = 0.0;
  const std::size_t B = cfg.stage1.batch;
  for (std::size_t start = 0; start < frames.size(); start += B) {
    const std::size_t end = std::min(frames.size(), start + B);
    const double scale = 1.0 / static_cast<double>(end - start);
    grads.for_each_tensor([](const std::string&, std::span<double> g) {
      std::fill(g.begin(), g.end(), 0.0);
    });
    for (std::size_t i = start; i < end; ++i) {
      const VideoAnnotation& v = *data.train[frames[i].first];
      const std::size_t t = frames[i].second;
      const auto out = encoder_forward(s.encoder, v.features->row(t));
      const auto tg = detail::targets_of(v.labels[t]);
      auto loss = multitask_loss(out.phase_logits, out.tool_logits, tg.phase, tg.tools,
                                 st.phase_weights, st.tool_weights, st.cooccurrence, alphas,
                                 cfg.joint_activation);
      detail::check_finite_loss(loss.value, "stage 1");
      loss_sum += loss.value;
      for (double& g : *loss.grad_phase) g *= scale;
      for (double& g : *loss.grad_tool) g *= scale;
      encoder_backward_accumulate(s.encoder, out.cache, *loss.grad_phase, *loss.grad_tool, grads);
    }
    clip_gradient_norm(grads, cfg.stage1.clip_norm);
    sgd_step(s.encoder, grads, s.encoder_velocity, sgd);
  }
  rec.train_loss = loss_sum / static_cast<double>(frames.size());
  rec.val_loss = encoder_mean_loss(s.encoder, data.test, st, alphas, cfg.joint_activation);
  detail::check_finite_loss(rec.val_loss, "stage 1 validation");
  s.lr = s.scheduler.step(rec.val_loss, s.lr);
  ++s.epoch;
  s.history1.push_back(rec);
  return rec;
}

// ---------------------------------------------------------------------------
// Feature extraction

/// Whitened encoder features of one video, T x F.
using FeatureSequence = Matrix;

inline Matrix encoder_features(const EncoderParams& enc, const VideoAnnotation& v) {
  detail::require_features(v, enc.dims().input);
  Matrix out(v.length(), enc.dims().feature);
  for (std::size_t t = 0; t < v.length(); ++t) {
    const auto o = encoder_forward(enc, v.features->row(t));
    std::copy(o.features.begin(), o.features.end(), out.row(t).begin());
  }
  return out;
}

inline WhiteningModel fit_feature_whitening(const EncoderParams& enc,
                                            std::span<const VideoAnnotation* const> train,
                                            const PipelineConfig& cfg) {
  std::vector<Vector> rows;
  for (const auto* v : train) {
    const Matrix f = encoder_features(enc, *v);
    for (std::size_t t = 0; t < f.rows(); ++t) rows.emplace_back(f.row(t).begin(), f.row(t).end());
  }
  return fit_whitening(rows, cfg.whitening_lambda, cfg.whitening_mode);
}

inline FeatureSequence whitened_sequence(const EncoderParams& enc, const WhiteningModel& w,
                                         const VideoAnnotation& v) {
  Matrix f = encoder_features(enc, v);
  for (std::size_t t = 0; t < f.rows(); ++t) {
    const Vector wt = apply_whitening(w, f.row(t));
    std::copy(wt.begin(), wt.end(), f.row(t).begin());
  }
  return f;
}

struct ExtractedFeatures {
  std::vector<FeatureSequence> train;  // aligned with SplitView::train
  std::vector<FeatureSequence> test;   // aligned with SplitView::test
  WhiteningModel whitening;
};

/// Encoder features for every video; whitening is fit on the training split
/// and applied to both splits.
inline ExtractedFeatures extract_features(const EncoderParams& enc, const SplitView& data,
                                          const PipelineConfig& cfg) {
  ExtractedFeatures out;
  out.whitening = fit_feature_whitening(enc, data.train, cfg);
  for (const auto* v : data.train) out.train.push_back(whitened_sequence(enc, out.whitening, *v));
  for (const auto* v : data.test) out.test.push_back(whitened_sequence(enc, out.whitening, *v));
  return out;
}

inline void extract_with_whitening(const EncoderParams& enc, const WhiteningModel& w,
                                   const SplitView& data, ExtractedFeatures& out) {
  out.whitening = w;
  out.train.clear();
  out.test.clear();
  for (const auto* v : data.train) out.train.push_back(whitened_sequence(enc, w, *v));
  for (const auto* v : data.test) out.test.push_back(whitened_sequence(enc, w, *v));
}

// ---------------------------------------------------------------------------
// Stage 2

struct SequenceLoss {
  double mean = 0.0;
  Matrix grad_phase;  // already divided by T
  Matrix grad_tool;
};

inline SequenceLoss sequence_loss(const SequenceOutput& out, std::span<const FrameLabel> labels,
                                  const TrainingStats& st, const MultitaskWeights& alphas,
                                  JointActivation act) {
  const std::size_t T = out.length();
  require_dims(labels.size(), T, "sequence labels");
  SequenceLoss r{0.0, Matrix(T, out.phase_logits.cols()), Matrix(T, out.tool_logits.cols())};
  const double scale = 1.0 / static_cast<double>(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto tg = detail::targets_of(labels[t]);
    const auto l = multitask_loss(out.phase_logits.row(t), out.tool_logits.row(t), tg.phase,
                                  tg.tools, st.phase_weights, st.tool_weights, st.cooccurrence,
                                  alphas, act);
    r.mean += l.value;
    for (std::size_t k = 0; k < l.grad_phase->size(); ++k) r.grad_phase(t, k) = (*l.grad_phase)[k] * scale;
    for (std::size_t k = 0; k < l.grad_tool->size(); ++k) r.grad_tool(t, k) = (*l.grad_tool)[k] * scale;
  }
  r.mean *= scale;
  return r;
}

inline double bilstm_mean_loss(const BiLstmParams& p, std::span<const FeatureSequence> seqs,
                               std::span<const VideoAnnotation* const> videos,
                               const TrainingStats& st, const MultitaskWeights& alphas,
                               JointActivation act) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto out = bilstm_forward(p, seqs[i]);
    sum += sequence_loss(out, videos[i]->labels, st, alphas, act).mean *
           static_cast<double>(out.length());
    n += out.length();
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

/// Switches a finished stage 1 into stage 2 (or done for frame-only ablations).
inline void begin_stage2(PipelineState& s, const SplitView& data, const PipelineConfig& cfg,
                         ExtractedFeatures& feats) {
  if (!has_stage2(cfg.ablation)) {
    s.stage = Stage::done;
    return;
  }
  feats = extract_features(s.encoder, data, cfg);
  s.whitening = feats.whitening;
  SeededRng init_rng = SeededRng::child(cfg.seed, 2);
  s.lstm = init_bilstm({cfg.feature_dim, cfg.lstm_hidden, kNumPhases, kNumTools}, init_rng);
  s.lstm_velocity = zeros_like(*s.lstm);
  s.stage = Stage::stage2;
  s.epoch = 0;
  s.lr = cfg.stage2.sgd.lr;
  s.scheduler = {cfg.stage2.plateau_factor, cfg.stage2.patience};
}

/// One stage-2 epoch: shuffled video order, one optimizer step per video.
inline EpochRecord stage2_epoch(PipelineState& s, const SplitView& data,
                                const ExtractedFeatures& feats, const TrainingStats& st,
                                const PipelineConfig& cfg) {
  if (!s.lstm) fail(ErrorKind::invalid_argument, "stage 2 has not been initialised");
  const MultitaskWeights alphas = effective_alphas(cfg.ablation, cfg.alphas);
  std::vector<std::uint32_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  if (order.empty()) fail(ErrorKind::invalid_argument, "empty training split");
  s.rng.shuffle(order);

  EpochRecord rec;
  rec.epoch = s.epoch + 1;
  rec.lr = s.lr;
  const SgdConfig sgd{s.lr, cfg.stage2.sgd.momentum, cfg.stage2.sgd.weight_decay};
  double loss_sum = 0.0;
  std::size_t frames = 0;
  BiLstmParams grads = zeros_like(*s.lstm);
  for (std::uint32_t i : order) {
    const auto out = bilstm_forward(*s.lstm, feats.train[i]);
    const auto loss = sequence_loss(out, data.train[i]->labels, st, alphas, cfg.joint_activation);
    detail::check_finite_loss(loss.mean, "stage 2");
    loss_sum += loss.mean * static_cast<double>(out.length());
    frames += out.length();
    grads.for_each_tensor([](const std::string&, std::span<double> g) {
      std::fill(g.begin(), g.end(), 0.0);
    });
    bilstm_backward_accumulate(*s.lstm, out.cache, loss.grad_phase, loss.grad_tool, grads);
    clip_gradient_norm(grads, cfg.stage2.clip_norm);
    sgd_step(*s.lstm, grads, *s.lstm_velocity, sgd);
  }
  rec.train_loss = loss_sum / static_cast<double>(frames);
  rec.val_loss = bilstm_mean_loss(*s.lstm, feats.test, data.test, st, alphas, cfg.joint_activation);
  detail::check_finite_loss(rec.val_loss, "stage 2 validation");
  s.lr = s.scheduler.step(rec.val_loss, s.lr);
  ++s.epoch;
  s.history2.push_back(rec);
  return rec;
}

/// Called after every completed epoch with the current state.
using EpochCallback = std::function<void(const PipelineState&, const EpochRecord&)>;

/// Advances `s` until the pipeline is done or `max_epochs` more epochs ran.
/// Returns true when the pipeline finished.
inline bool run_pipeline(PipelineState& s, const SplitView& data, const TrainingStats& st,
                         const PipelineConfig& cfg, const EpochCallback& on_epoch = {},
                         std::optional<int> max_epochs = std::nullopt) {
  ExtractedFeatures feats;
  if (s.stage == Stage::stage2) {
    if (!s.whitening) fail(ErrorKind::corruption, "stage-2 state without a whitening model");
    extract_with_whitening(s.encoder, *s.whitening, data, feats);
  }
  int budget = max_epochs.value_or(std::numeric_limits<int>::max());
  while (s.stage != Stage::done && budget > 0) {
    if (s.stage == Stage::stage1) {
      if (s.epoch >= cfg.stage1.epochs) {
        begin_stage2(s, data, cfg, feats);
        continue;
      }
      const auto rec = stage1_epoch(s, data, st, cfg);
      --budget;
      if (on_epoch) on_epoch(s, rec);
    } else {
      if (s.epoch >= cfg.stage2.epochs) {
        s.stage = Stage::done;
        continue;
      }
      const auto rec = stage2_epoch(s, data, feats, st, cfg);
      --budget;
      if (on_epoch) on_epoch(s, rec);
    }
  }
  // Close out a stage whose last epoch just ran so the returned state is final.
  if (s.stage == Stage::stage1 && s.epoch >= cfg.stage1.epochs && !has_stage2(cfg.ablation))
    s.stage = Stage::done;
  if (s.stage == Stage::stage2 && s.epoch >= cfg.stage2.epochs) s.stage = Stage::done;
  return s.stage == Stage::done;
}

struct Stage1Result {
  EncoderParams encoder;
  std::vector<EpochRecord> history;
};

inline Stage1Result train_stage1(const SplitView& data, const TrainingStats& st,
                                 const PipelineConfig& cfg) {
  if (data.train.empty() || data.test.empty())
    fail(ErrorKind::invalid_argument, "stage 1 needs non-empty train and validation splits");
  PipelineState s = init_pipeline(cfg, data.train.front()->features
                                           ? data.train.front()->features->cols()
                                           : 0);
  for (int e = 0; e < cfg.stage1.epochs; ++e) stage1_epoch(s, data, st, cfg);
  return {s.encoder, s.history1};
}

struct Stage2Result {
  BiLstmParams lstm;
  std::vector<EpochRecord> history;
};

inline Stage2Result train_stage2(const ExtractedFeatures& feats, const SplitView& data,
                                 const TrainingStats& st, const PipelineConfig& cfg) {
  PipelineState s;
  SeededRng init_rng = SeededRng::child(cfg.seed, 2);
  s.lstm = init_bilstm({feats.whitening.dim(), cfg.lstm_hidden, kNumPhases, kNumTools}, init_rng);
  s.lstm_velocity = zeros_like(*s.lstm);
  s.stage = Stage::stage2;
  s.lr = cfg.stage2.sgd.lr;
  s.scheduler = {cfg.stage2.plateau_factor, cfg.stage2.patience};
  s.rng = SeededRng::child(cfg.seed, 4);
  for (int e = 0; e < cfg.stage2.epochs; ++e) stage2_epoch(s, data, feats, st, cfg);
  return {*s.lstm, s.history2};
}

// ---------------------------------------------------------------------------
// Inference

/// Logits of the trained pipeline for `videos`: Bi-LSTM outputs when the
/// ablation has a temporal stage, otherwise per-frame encoder outputs.
inline PredictionSet predict(const PipelineState& s, std::span<const VideoAnnotation* const> videos) {
  PredictionSet out;
  for (const auto* v : videos) {
    VideoPrediction p;
    p.video_id = v->video_id;
    p.truth = v->labels;
    p.scores_are_logits = true;
    if (s.lstm && s.whitening) {
      const auto seq = whitened_sequence(s.encoder, *s.whitening, *v);
      auto o = bilstm_forward(*s.lstm, seq);
      p.phase_scores = std::move(o.phase_logits);
      p.tool_scores = std::move(o.tool_logits);
    } else {
      detail::require_features(*v, s.encoder.dims().input);
      p.phase_scores = Matrix(v->length(), kNumPhases);
      p.tool_scores = Matrix(v->length(), kNumTools);
      for (std::size_t t = 0; t < v->length(); ++t) {
        const auto o = encoder_forward(s.encoder, v->features->row(t));
        std::copy(o.phase_logits.begin(), o.phase_logits.end(), p.phase_scores.row(t).begin());
        std::copy(o.tool_logits.begin(), o.tool_logits.end(), p.tool_scores.row(t).begin());
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace swmt
