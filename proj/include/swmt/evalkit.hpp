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

// Post-processing and evaluation: median filtering of phase predictions,
// one-vs-rest precision/recall/accuracy, ranked average precision, and the
// report that places measured metrics next to the published reference rows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swmt/error.hpp"
#include "swmt/labels.hpp"
#include "swmt/tensorcore.hpp"

namespace swmt {

inline constexpr int kDefaultSmoothWindow = 9;
inline constexpr double kDefaultToolThreshold = 0.5;
// Provenance tag on published reference rows so they never pass for measurements.
inline constexpr const char* kReferenceSource = "paper-table-2";

/// out[t] = median of the window centred on t. Near the ends the window
/// shrinks symmetrically, so it always has odd length.
template <class T>
std::vector<T> median_filter(std::span<const T> seq, int window) {
  if (window < 1 || window % 2 == 0)
    fail(ErrorKind::invalid_argument, "median window must be odd and positive, got " +
                                          std::to_string(window));
  const std::size_t n = seq.size();
  const std::size_t half = static_cast<std::size_t>(window / 2);
  std::vector<T> out(n);
  std::vector<T> buf;
  buf.reserve(static_cast<std::size_t>(window));
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t h = std::min({half, t, n - 1 - t});
    buf.assign(seq.begin() + static_cast<std::ptrdiff_t>(t - h),
               seq.begin() + static_cast<std::ptrdiff_t>(t + h + 1));
    std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(h), buf.end());
    out[t] = buf[h];
  }
  return out;
}

inline std::vector<int> median_filter_labels(std::span<const int> seq, int window) {
  return median_filter<int>(seq, window);
}

// ---------------------------------------------------------------------------
// Predictions

struct VideoPrediction {
  std::string video_id;
  Matrix phase_scores;  // T x N1
  Matrix tool_scores;   // T x N2
  std::vector<FrameLabel> truth;
  /// Scores are raw logits: phase rows go through softmax, tool entries through
  /// sigmoid, before ranking or thresholding.
  bool scores_are_logits = true;
};

using PredictionSet = std::vector<VideoPrediction>;

struct FrameDecision {
  int phase = 0;
  std::uint8_t tools = 0;  // bits over all N2 classes, no-tool derived
};

inline Matrix phase_probabilities(const VideoPrediction& v) {
  if (!v.scores_are_logits) return v.phase_scores;
  Matrix out(v.phase_scores.rows(), v.phase_scores.cols());
  for (std::size_t t = 0; t < out.rows(); ++t) {
    const Vector p = softmax(v.phase_scores.row(t));
    std::copy(p.begin(), p.end(), out.row(t).begin());
  }
  return out;
}

inline Matrix tool_probabilities(const VideoPrediction& v) {
  if (!v.scores_are_logits) return v.tool_scores;
  Matrix out(v.tool_scores.rows(), v.tool_scores.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = sigmoid(v.tool_scores.values()[i]);
  return out;
}

/// Phase = argmax; tool bit i = probability >= threshold over the physical
/// tools, with the no-tool bit derived from them.
inline std::vector<FrameDecision> classify_from_scores(const VideoPrediction& v,
                                                       double tool_threshold = kDefaultToolThreshold) {
  const std::size_t T = v.phase_scores.rows();
  if (v.tool_scores.rows() != T || v.truth.size() != T)
    fail(ErrorKind::dimension, v.video_id + ": prediction lengths do not match");
  const Matrix tools = tool_probabilities(v);
  const std::size_t n_physical = std::min(tools.cols(), kNumPhysicalTools);
  std::vector<FrameDecision> out(T);
  for (std::size_t t = 0; t < T; ++t) {
    out[t].phase = static_cast<int>(argmax(v.phase_scores.row(t)));
    std::uint8_t bits = 0;
    for (std::size_t k = 0; k < n_physical; ++k)
      if (tools(t, k) >= tool_threshold) bits |= static_cast<std::uint8_t>(1u << k);
    if (tools.cols() == kNumTools && bits == 0) bits = 1u << kNoTool;
    out[t].tools = bits;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
};

struct PrecisionRecallAccuracy {
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
};

inline PrecisionRecallAccuracy rates_from(const ConfusionCounts& c) {
  PrecisionRecallAccuracy r;
  r.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  r.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  r.accuracy = c.total() == 0 ? 0.0
                              : static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return r;
}

/// Bits are 0/1 bytes.
inline ConfusionCounts count_binary(std::span<const std::uint8_t> pred,
                                    std::span<const std::uint8_t> truth) {
  require_dims(pred.size(), truth.size(), "prediction/truth length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && truth[i]) ++c.tp;
    else if (pred[i]) ++c.fp;
    else if (truth[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// One-vs-rest rates of class `c` over integer label sequences.
inline PrecisionRecallAccuracy precision_recall_accuracy(std::span<const int> pred,
                                                         std::span<const int> truth, int c) {
  require_dims(pred.size(), truth.size(), "prediction/truth length");
  std::vector<std::uint8_t> p(pred.size()), y(truth.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p[i] = pred[i] == c;
    y[i] = truth[i] == c;
  }
  return rates_from(count_binary(p, y));
}

struct AveragePrecision {
  double value = 0.0;
  bool defined = false;  // false when the truth has no positives (value is 0)
};

/// Mean over positives of the precision at that positive's rank, ranking by
/// descending score with ties broken by ascending index.
inline AveragePrecision average_precision(std::span<const double> scores,
                                          std::span<const std::uint8_t> truth) {
  require_dims(scores.size(), truth.size(), "score/truth length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!truth[order[rank]]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  if (hits == 0) return {0.0, false};
  return {sum / static_cast<double>(hits), true};
}

// ---------------------------------------------------------------------------
// Report

struct ClassMetrics {
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  double ap = 0.0;
  bool ap_defined = false;
};

struct TaskMetrics {
  std::vector<ClassMetrics> classes;
  double avg_precision = 0.0;
  double avg_recall = 0.0;
  double avg_accuracy = 0.0;
  double mean_ap = 0.0;
  double frame_accuracy = 0.0;  // phases only: fraction of frames with the right label
};

struct ReferenceRow {
  std::string method;
  std::string task;    // "tool" | "phase"
  std::string metric;  // "average_precision" | "average_recall" | "average_accuracy"
  double value;
};

/// Published comparison table (tool and phase average precision / recall /
/// accuracy per method). Reference only; never produced by this code.
inline const std::vector<ReferenceRow>& reference_rows() {
  static const std::vector<ReferenceRow> rows = {
      {"BL1", "tool", "average_precision", 0.955},
      {"BL1", "tool", "average_recall", 0.928},
      {"BL1", "tool", "average_accuracy", 0.958},
      {"BL2", "tool", "average_precision", 0.963},
      {"BL2", "tool", "average_recall", 0.936},
      {"BL2", "tool", "average_accuracy", 0.964},
      {"BL3", "phase", "average_precision", 0.515},
      {"BL3", "phase", "average_recall", 0.63},
      {"BL3", "phase", "average_accuracy", 0.88},
      {"BL4", "phase", "average_precision", 0.63},
      {"BL4", "phase", "average_recall", 0.717},
      {"BL4", "phase", "average_accuracy", 0.92},
      {"BL5", "tool", "average_precision", 0.974},
      {"BL5", "tool", "average_recall", 0.88},
      {"BL5", "tool", "average_accuracy", 0.938},
      {"BL5", "phase", "average_precision", 0.705},
      {"BL5", "phase", "average_recall", 0.6944},
      {"BL5", "phase", "average_accuracy", 0.935},
      {"BL6", "tool", "average_precision", 0.81},
      {"BL6", "phase", "average_precision", 0.848},
      {"BL6", "phase", "average_recall", 0.883},
      {"BL6", "phase", "average_accuracy", 0.92},
      {"BL7", "tool", "average_precision", 0.9789},
      {"proposed", "tool", "average_precision", 0.99},
      {"proposed", "tool", "average_recall", 0.912},
      {"proposed", "tool", "average_accuracy", 0.9353},
      {"proposed", "phase", "average_precision", 0.857},
      {"proposed", "phase", "average_recall", 0.835},
      {"proposed", "phase", "average_accuracy", 0.966},
  };
  return rows;
}

inline std::optional<double> reference_value(std::string_view method, std::string_view task,
                                             std::string_view metric) {
  for (const auto& r : reference_rows())
    if (r.method == method && r.task == task && r.metric == metric) return r.value;
  return std::nullopt;
}

struct EvalReport {
  int smoothing_window = kDefaultSmoothWindow;
  double tool_threshold = kDefaultToolThreshold;
  std::size_t n_videos = 0;
  std::size_t n_frames = 0;
  TaskMetrics tool;          // classes: 7 physical tools then no-tool
  TaskMetrics phase_raw;     // before median filtering
  TaskMetrics phase_smooth;  // after median filtering
  nlohmann::json run_info;   // echo of the producing configuration
};

namespace detail {

inline void finalize_averages(TaskMetrics& m, std::size_t n_averaged) {
  double p = 0, r = 0, a = 0, ap = 0;
  std::size_t n_ap = 0;
  for (std::size_t c = 0; c < n_averaged; ++c) {
    p += m.classes[c].precision;
    r += m.classes[c].recall;
    a += m.classes[c].accuracy;
    if (m.classes[c].ap_defined) {
      ap += m.classes[c].ap;
      ++n_ap;
    }
  }
  const double n = static_cast<double>(n_averaged);
  m.avg_precision = p / n;
  m.avg_recall = r / n;
  m.avg_accuracy = a / n;
  m.mean_ap = n_ap == 0 ? 0.0 : ap / static_cast<double>(n_ap);
}

inline TaskMetrics phase_metrics(const std::vector<int>& pred, const std::vector<int>& truth,
                                 const std::vector<Vector>& class_scores) {
  TaskMetrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i];
  m.frame_accuracy = pred.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(pred.size());
  for (std::size_t c = 0; c < class_scores.size(); ++c) {
    ClassMetrics cm;
    cm.name = c < kPhaseNames.size() ? std::string(kPhaseNames[c]) : "phase" + std::to_string(c);
    const auto pra = precision_recall_accuracy(pred, truth, static_cast<int>(c));
    cm.precision = pra.precision;
    cm.recall = pra.recall;
    cm.accuracy = pra.accuracy;
    std::vector<std::uint8_t> y(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) y[i] = truth[i] == static_cast<int>(c);
    const auto ap = average_precision(class_scores[c], y);
    cm.ap = ap.value;
    cm.ap_defined = ap.defined;
    m.classes.push_back(cm);
  }
  finalize_averages(m, m.classes.size());
  return m;
}

}  // namespace detail

/// Pools every frame of every video. Phase metrics are reported before and
/// after median filtering; smoothing applies to the decided labels and, for
/// AP, to each class's probability track. Tool averages cover the physical
/// tools only; the no-tool row is reported separately.
inline EvalReport build_report(const PredictionSet& pred, int smoothing_window = kDefaultSmoothWindow,
                               double tool_threshold = kDefaultToolThreshold) {
  EvalReport rep;
  rep.smoothing_window = smoothing_window;
  rep.tool_threshold = tool_threshold;
  rep.n_videos = pred.size();
  if (pred.empty()) fail(ErrorKind::invalid_argument, "empty prediction set");
  const std::size_t n_phases = pred.front().phase_scores.cols();
  const std::size_t n_tools = pred.front().tool_scores.cols();

  std::vector<int> phase_truth, phase_raw, phase_smooth;
  std::vector<Vector> raw_scores(n_phases), smooth_scores(n_phases);
  std::vector<Vector> tool_scores(n_tools);
  std::vector<std::vector<std::uint8_t>> tool_pred(n_tools), tool_truth(n_tools);

  for (const auto& v : pred) {
    if (v.phase_scores.cols() != n_phases || v.tool_scores.cols() != n_tools)
      fail(ErrorKind::dimension, v.video_id + ": score width differs across videos");
    if (!all_finite(v.phase_scores.values()) || !all_finite(v.tool_scores.values()))
      fail(ErrorKind::numeric, v.video_id + ": non-finite scores");
    const auto decisions = classify_from_scores(v, tool_threshold);
    const Matrix probs = phase_probabilities(v);
    const Matrix tprobs = tool_probabilities(v);
    const std::size_t T = decisions.size();
    rep.n_frames += T;

    std::vector<int> labels(T);
    for (std::size_t t = 0; t < T; ++t) labels[t] = decisions[t].phase;
    const auto smoothed = median_filter_labels(labels, smoothing_window);
    for (std::size_t t = 0; t < T; ++t) {
      phase_truth.push_back(v.truth[t].phase);
      phase_raw.push_back(labels[t]);
      phase_smooth.push_back(smoothed[t]);
    }
    for (std::size_t c = 0; c < n_phases; ++c) {
      Vector track(T);
      for (std::size_t t = 0; t < T; ++t) track[t] = probs(t, c);
      raw_scores[c].insert(raw_scores[c].end(), track.begin(), track.end());
      const auto sm = median_filter<double>(track, smoothing_window);
      smooth_scores[c].insert(smooth_scores[c].end(), sm.begin(), sm.end());
    }
    for (std::size_t k = 0; k < n_tools; ++k)
      for (std::size_t t = 0; t < T; ++t) {
        tool_scores[k].push_back(tprobs(t, k));
        tool_pred[k].push_back((decisions[t].tools >> k) & 1u);
        tool_truth[k].push_back(v.truth[t].has_tool(k));
      }
  }

  rep.phase_raw = detail::phase_metrics(phase_raw, phase_truth, raw_scores);
  rep.phase_smooth = detail::phase_metrics(phase_smooth, phase_truth, smooth_scores);

  for (std::size_t k = 0; k < n_tools; ++k) {
    ClassMetrics cm;
    cm.name = k < kToolNames.size() ? std::string(kToolNames[k]) : "tool" + std::to_string(k);
    const auto pra = rates_from(count_binary(tool_pred[k], tool_truth[k]));
    cm.precision = pra.precision;
    cm.recall = pra.recall;
    cm.accuracy = pra.accuracy;
    const auto ap = average_precision(tool_scores[k], tool_truth[k]);
    cm.ap = ap.value;
    cm.ap_defined = ap.defined;
    rep.tool.classes.push_back(cm);
  }
  detail::finalize_averages(rep.tool, std::min(n_tools, kNumPhysicalTools));
  return rep;
}

inline nlohmann::json to_json(const TaskMetrics& m) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : m.classes)
    classes.push_back({{"name", c.name},
                       {"precision", c.precision},
                       {"recall", c.recall},
                       {"accuracy", c.accuracy},
                       {"ap", c.ap},
                       {"ap_defined", c.ap_defined}});
  return {{"classes", classes},
          {"average_precision", m.avg_precision},
          {"average_recall", m.avg_recall},
          {"average_accuracy", m.avg_accuracy},
          {"mean_ap", m.mean_ap},
          {"frame_accuracy", m.frame_accuracy}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json refs = nlohmann::json::array();
  for (const auto& row : reference_rows())
    refs.push_back({{"method", row.method},
                    {"task", row.task},
                    {"metric", row.metric},
                    {"value", row.value},
                    {"source", kReferenceSource}});
  return {{"ap_definition", "mean of precision at the rank of each positive (pooled frames)"},
          {"averaging", "unweighted macro average; tools over the 7 physical tools"},
          {"smoothing_window", r.smoothing_window},
          {"tool_threshold", r.tool_threshold},
          {"n_videos", r.n_videos},
          {"n_frames", r.n_frames},
          {"tool", to_json(r.tool)},
          {"phase_raw", to_json(r.phase_raw)},
          {"phase_smoothed", to_json(r.phase_smooth)},
          {"reference", refs},
          {"run", r.run_info}};
}

namespace detail {
inline std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// CSV rows: task,class,metric,smoothing,value,source
inline std::string to_csv(const EvalReport& r) {
  std::string out = "task,class,metric,smoothing,value,source\n";
  auto row = [&](const std::string& task, const std::string& cls, const std::string& metric,
                 const std::string& smoothing, double value, const std::string& source) {
    out += task + "," + cls + "," + metric + "," + smoothing + "," + detail::csv_number(value) +
           "," + source + "\n";
  };
  auto task_rows = [&](const std::string& task, const TaskMetrics& m, const std::string& sm) {
    for (const auto& c : m.classes) {
      row(task, c.name, "precision", sm, c.precision, "measured");
      row(task, c.name, "recall", sm, c.recall, "measured");
      row(task, c.name, "accuracy", sm, c.accuracy, "measured");
      row(task, c.name, "ap", sm, c.ap, "measured");
    }
    row(task, "average", "average_precision", sm, m.avg_precision, "measured");
    row(task, "average", "average_recall", sm, m.avg_recall, "measured");
    row(task, "average", "average_accuracy", sm, m.avg_accuracy, "measured");
    row(task, "average", "mean_ap", sm, m.mean_ap, "measured");
  };
  task_rows("tool", r.tool, "none");
  task_rows("phase", r.phase_raw, "before");
  row("phase", "all", "frame_accuracy", "before", r.phase_raw.frame_accuracy, "measured");
  task_rows("phase", r.phase_smooth, "after");
  row("phase", "all", "frame_accuracy", "after", r.phase_smooth.frame_accuracy, "measured");
  for (const auto& ref : reference_rows())
    row(ref.task, ref.method, ref.metric, "n/a", ref.value, kReferenceSource);
  return out;
}

}  // namespace swmt
