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

// RunConfig: one JSON document covering the synthetic generator, both
// training stages, loss weights, epsilon mode, whitening and evaluation.
// Every key is optional (defaults apply) but unknown keys and ill-typed or
// out-of-range values are rejected with the offending field path.

#include <cstdint>
#include <initializer_list>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "swmt/data.hpp"
#include "swmt/error.hpp"
#include "swmt/evalkit.hpp"
#include "swmt/train.hpp"

namespace swmt {

struct EvalConfig {
  int smooth_window = kDefaultSmoothWindow;
  double tool_threshold = kDefaultToolThreshold;
};

struct RunConfig {
  SyntheticConfig synthetic;
  PipelineConfig pipeline;
  EvalConfig eval;
  bool seed_given = false;  // true when the document sets "seed"

  void set_seed(std::uint64_t seed) {
    synthetic.seed = seed;
    pipeline.seed = seed;
  }
};

namespace detail {

class FieldReader {
 public:
  FieldReader(const nlohmann::json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(ErrorKind::config, where("") + " must be an object");
  }

  void allow_only(std::initializer_list<const char*> keys) const {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!allowed.count(it.key())) fail(ErrorKind::config, "unknown key " + where(it.key()));
  }

  bool has(const char* key) const { return obj_.contains(key); }

  template <class T>
  void read(const char* key, T& out) const {
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::config, where(key) + " has the wrong type");
    }
  }

  void read_number(const char* key, double& out) const {
    if (!obj_.contains(key)) return;
    if (!obj_.at(key).is_number()) fail(ErrorKind::config, where(key) + " must be a number");
    out = obj_.at(key).get<double>();
  }

  template <class Int>
  void read_count(const char* key, Int& out) const {
    if (!obj_.contains(key)) return;
    const auto& v = obj_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      fail(ErrorKind::config, where(key) + " must be a non-negative integer");
    out = v.get<Int>();
  }

  void read_bool(const char* key, bool& out) const {
    if (!obj_.contains(key)) return;
    if (!obj_.at(key).is_boolean()) fail(ErrorKind::config, where(key) + " must be a boolean");
    out = obj_.at(key).get<bool>();
  }

  FieldReader child(const char* key) const { return FieldReader(obj_.at(key), where(key)); }

  std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const nlohmann::json& json() const { return obj_; }

 private:
  const nlohmann::json& obj_;
  std::string path_;
};

inline void check(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) fail(ErrorKind::config, field + " " + rule);
}

inline void read_stage(const FieldReader& r, StageConfig& s) {
  r.allow_only({"epochs", "lr", "momentum", "weight_decay", "plateau_factor", "patience", "batch",
                "clip_norm"});
  r.read_count("epochs", s.epochs);
  r.read_number("lr", s.sgd.lr);
  r.read_number("momentum", s.sgd.momentum);
  r.read_number("weight_decay", s.sgd.weight_decay);
  r.read_number("plateau_factor", s.plateau_factor);
  r.read_count("patience", s.patience);
  r.read_count("batch", s.batch);
  r.read_number("clip_norm", s.clip_norm);
  check(s.epochs > 0, r.where("epochs"), "must be positive");
  check(s.sgd.lr > 0.0, r.where("lr"), "must be positive");
  check(s.sgd.momentum >= 0.0 && s.sgd.momentum < 1.0, r.where("momentum"), "must lie in [0,1)");
  check(s.sgd.weight_decay >= 0.0, r.where("weight_decay"), "must be >= 0");
  check(s.plateau_factor > 0.0 && s.plateau_factor < 1.0, r.where("plateau_factor"),
        "must lie in (0,1)");
  check(s.patience > 0, r.where("patience"), "must be positive");
  check(s.batch > 0, r.where("batch"), "must be positive");
  check(s.clip_norm >= 0.0, r.where("clip_norm"), "must be >= 0");
}

inline void read_synthetic(const FieldReader& r, SyntheticConfig& c) {
  r.allow_only({"n_videos", "phase_order", "duration_mean", "duration_std", "duration_scale",
                "swap_p5_p6_probability", "emission", "feature_dim", "embedding_scale",
                "noise_sigma"});
  r.read_count("n_videos", c.n_videos);
  r.read("phase_order", c.phase_order);
  r.read("duration_mean", c.duration_mean);
  r.read("duration_std", c.duration_std);
  r.read_number("duration_scale", c.duration_scale);
  r.read_number("swap_p5_p6_probability", c.swap_p5_p6_probability);
  r.read("emission", c.emission);
  r.read_count("feature_dim", c.feature_dim);
  r.read_number("embedding_scale", c.embedding_scale);
  r.read_number("noise_sigma", c.noise_sigma);
  c.validate();  // messages already carry synthetic.* field paths
}

inline void read_pipeline_sections(const FieldReader& root, PipelineConfig& p) {
  if (root.has("stage1")) read_stage(root.child("stage1"), p.stage1);
  if (root.has("stage2")) read_stage(root.child("stage2"), p.stage2);
  if (root.has("model")) {
    const auto r = root.child("model");
    r.allow_only({"encoder_hidden", "feature_dim", "lstm_hidden"});
    r.read_count("encoder_hidden", p.encoder_hidden);
    r.read_count("feature_dim", p.feature_dim);
    r.read_count("lstm_hidden", p.lstm_hidden);
    check(p.encoder_hidden > 0, r.where("encoder_hidden"), "must be positive");
    check(p.feature_dim > 0, r.where("feature_dim"), "must be positive");
    check(p.lstm_hidden > 0, r.where("lstm_hidden"), "must be positive");
  }
  if (root.has("loss")) {
    const auto r = root.child("loss");
    r.allow_only({"alpha_phase", "alpha_tool", "alpha_joint", "joint_loss_swap_activations",
                  "epsilon", "strict_epsilon"});
    r.read_number("alpha_phase", p.alphas.phase);
    r.read_number("alpha_tool", p.alphas.tool);
    r.read_number("alpha_joint", p.alphas.joint);
    bool swap = p.joint_activation == JointActivation::swapped;
    r.read_bool("joint_loss_swap_activations", swap);
    p.joint_activation = swap ? JointActivation::swapped : JointActivation::as_written;
    r.read_number("epsilon", p.epsilon);
    r.read_bool("strict_epsilon", p.strict_epsilon);
    check(p.alphas.phase >= 0.0, r.where("alpha_phase"), "must be >= 0");
    check(p.alphas.tool >= 0.0, r.where("alpha_tool"), "must be >= 0");
    check(p.alphas.joint >= 0.0, r.where("alpha_joint"), "must be >= 0");
    check(p.alphas.valid(), r.where(""), "alphas must not all be zero");
    check(p.epsilon > 0.0, r.where("epsilon"), "must be positive");
  }
  if (root.has("whitening")) {
    const auto r = root.child("whitening");
    r.allow_only({"mode", "lambda"});
    std::string mode = to_string(p.whitening_mode);
    r.read("mode", mode);
    check(mode == "zca" || mode == "standardize", r.where("mode"), "must be 'zca' or 'standardize'");
    p.whitening_mode = whitening_mode_from_string(mode);
    r.read_number("lambda", p.whitening_lambda);
    check(p.whitening_lambda >= 0.0, r.where("lambda"), "must be >= 0");
  }
  if (root.has("ablation")) {
    std::string a;
    root.read("ablation", a);
    try {
      p.ablation = ablation_from_string(a);
    } catch (const Error&) {
      fail(ErrorKind::config, root.where("ablation") + " must be one of BL1..BL5, proposed");
    }
  }
  if (root.has("seed")) {
    const auto& v = root.json().at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      fail(ErrorKind::config, root.where("seed") + " must be a non-negative integer");
    p.seed = v.get<std::uint64_t>();
  }
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& doc) {
  RunConfig c;
  const detail::FieldReader root(doc, "");
  root.allow_only({"seed", "synthetic", "model", "stage1", "stage2", "loss", "whitening", "eval",
                   "ablation"});
  detail::read_pipeline_sections(root, c.pipeline);
  c.seed_given = root.has("seed");
  c.synthetic.seed = c.pipeline.seed;
  if (root.has("synthetic")) detail::read_synthetic(root.child("synthetic"), c.synthetic);
  if (root.has("eval")) {
    const auto r = root.child("eval");
    r.allow_only({"smooth_window", "tool_threshold"});
    r.read_count("smooth_window", c.eval.smooth_window);
    r.read_number("tool_threshold", c.eval.tool_threshold);
    detail::check(c.eval.smooth_window >= 1 && c.eval.smooth_window % 2 == 1,
                  r.where("smooth_window"), "must be odd and positive");
    detail::check(c.eval.tool_threshold >= 0.0 && c.eval.tool_threshold <= 1.0,
                  r.where("tool_threshold"), "must lie in [0,1]");
  }
  return c;
}

inline RunConfig run_config_from_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(doc);
}

/// Inverse of to_json(PipelineConfig); used when reading checkpoints.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig p;
  const detail::FieldReader root(j, "");
  root.allow_only({"stage1", "stage2", "model", "loss", "whitening", "ablation", "seed"});
  detail::read_pipeline_sections(root, p);
  return p;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = to_json(c.pipeline);
  nlohmann::json syn = to_json(c.synthetic);
  syn.erase("seed");
  j["synthetic"] = syn;
  j["eval"] = {{"smooth_window", c.eval.smooth_window}, {"tool_threshold", c.eval.tool_threshold}};
  return j;
}

}  // namespace swmt
