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

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "swmt/evalkit.hpp"
#include "test_util.hpp"

namespace swmt {
namespace {

using Bits = std::vector<std::uint8_t>;

// Precision at every prefix of the ranking that ends on a positive.
double brute_force_ap(const Vector& scores, const Bits& truth) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });
  double sum = 0.0;
  int positives = 0;
  for (std::size_t k = 1; k <= order.size(); ++k) {
    if (!truth[order[k - 1]]) continue;
    int hits = 0;
    for (std::size_t j = 0; j < k; ++j) hits += truth[order[j]];
    sum += static_cast<double>(hits) / static_cast<double>(k);
    ++positives;
  }
  return positives == 0 ? 0.0 : sum / positives;
}

std::vector<int> sorted_median_oracle(const std::vector<int>& seq, int window) {
  const int n = static_cast<int>(seq.size());
  std::vector<int> out(seq.size());
  for (int t = 0; t < n; ++t) {
    const int h = std::min({window / 2, t, n - 1 - t});
    std::vector<int> w(seq.begin() + (t - h), seq.begin() + (t + h + 1));
    std::sort(w.begin(), w.end());
    out[t] = w[w.size() / 2];
  }
  return out;
}

VideoPrediction prediction_of(const std::vector<FrameLabel>& truth, SeededRng& rng) {
  VideoPrediction v;
  v.video_id = "v";
  v.truth = truth;
  v.phase_scores = Matrix(truth.size(), kNumPhases);
  v.tool_scores = Matrix(truth.size(), kNumTools);
  for (double& x : v.phase_scores.values()) x = rng.normal();
  for (double& x : v.tool_scores.values()) x = rng.normal();
  for (std::size_t t = 0; t < truth.size(); ++t) v.phase_scores(t, truth[t].phase) += 1.5;
  return v;
}

TEST(AveragePrecision, Examples) {
  EXPECT_NEAR(average_precision(Vector{0.9, 0.8, 0.1}, Bits{1, 0, 1}).value, (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(average_precision(Vector{0.9, 0.8, 0.1}, Bits{1, 1, 0}).value, 1.0);
  EXPECT_EQ(average_precision(Vector{0.9, 0.8, 0.7, 0.1}, Bits{0, 0, 0, 1}).value, 0.25);
  const auto none = average_precision(Vector{0.5, 0.2}, Bits{0, 0});
  EXPECT_FALSE(none.defined);
  EXPECT_EQ(none.value, 0.0);
  EXPECT_EQ(testing::error_kind_of([] { average_precision(Vector{0.5}, Bits{0, 1}); }), ErrorKind::dimension);
}

TEST(AveragePrecision, TiesBreakByIndex) {
  EXPECT_EQ(average_precision(Vector{0.5, 0.5}, Bits{0, 1}).value, 0.5);
  EXPECT_EQ(average_precision(Vector{0.5, 0.5}, Bits{1, 0}).value, 1.0);
}

TEST(AveragePrecision, MatchesBruteForceAndIsRankInvariant) {
  SeededRng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    Vector s(n);
    Bits y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(5)) / 4.0;  // coarse grid forces ties
      y[i] = rng.uniform() < 0.4;
    }
    const double ap = average_precision(s, y).value;
    EXPECT_EQ(ap, brute_force_ap(s, y));
    Vector t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    EXPECT_EQ(average_precision(t, y).value, ap);
  }
}

TEST(Rates, Examples) {
  const std::vector<int> truth{1, 1, 0, 0}, pred{1, 0, 0, 0};
  const auto r = precision_recall_accuracy(pred, truth, 1);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 0.5);
  EXPECT_EQ(r.accuracy, 0.75);
  const auto absent = precision_recall_accuracy(pred, truth, 3);
  EXPECT_EQ(absent.precision, 0.0);
  EXPECT_EQ(absent.recall, 0.0);
  EXPECT_EQ(absent.accuracy, 1.0);
  const auto perfect = precision_recall_accuracy(truth, truth, 0);
  EXPECT_EQ(perfect.precision, 1.0);
  EXPECT_EQ(perfect.recall, 1.0);
  EXPECT_EQ(perfect.accuracy, 1.0);
}

TEST(Rates, MatchConfusionCounting) {
  SeededRng rng(22);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<int> p(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<int>(rng.below(3));
      y[i] = static_cast<int>(rng.below(3));
    }
    int tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool a = p[i] == 2, b = y[i] == 2;
      tp += a && b;
      fp += a && !b;
      fn += !a && b;
      tn += !a && !b;
    }
    const auto r = precision_recall_accuracy(p, y, 2);
    EXPECT_EQ(r.precision, tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp));
    EXPECT_EQ(r.recall, tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn));
    EXPECT_EQ(r.accuracy, static_cast<double>(tp + tn) / static_cast<double>(n));
  }
}

TEST(MedianFilter, Examples) {
  EXPECT_EQ(median_filter_labels(std::vector<int>{0, 0, 1, 0, 0}, 3), (std::vector<int>{0, 0, 0, 0, 0}));
  EXPECT_EQ(median_filter_labels(std::vector<int>{0, 0, 0, 1, 1, 1}, 3), (std::vector<int>{0, 0, 0, 1, 1, 1}));
  const std::vector<int> constant(9, 4);
  for (int w : {1, 3, 5, 9, 21}) EXPECT_EQ(median_filter_labels(constant, w), constant);
  EXPECT_EQ(testing::error_kind_of([] { median_filter_labels(std::vector<int>{1}, 4); }), ErrorKind::invalid_argument);
  EXPECT_EQ(testing::error_kind_of([] { median_filter_labels(std::vector<int>{1}, 0); }), ErrorKind::invalid_argument);
}

TEST(MedianFilter, ExhaustiveAgainstSortOracle) {
  for (int n = 1; n <= 12; ++n)
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      std::vector<int> seq(n);
      for (int i = 0; i < n; ++i) seq[i] = (mask >> i) & 1;
      for (int w : {3, 5}) EXPECT_EQ(median_filter_labels(seq, w), sorted_median_oracle(seq, w));
    }
}

// One pass is not always a fixed point: alternating runs erode one frame per pass.
TEST(MedianFilter, SinglePassIsNotIdempotentOnAlternatingRuns) {
  const std::vector<int> seq{1, 1, 0, 1, 0, 1};
  const auto once = median_filter_labels(seq, 3);
  EXPECT_EQ(once, (std::vector<int>{1, 1, 1, 0, 1, 1}));
  EXPECT_EQ(median_filter_labels(once, 3), (std::vector<int>{1, 1, 1, 1, 1, 1}));
}

TEST(MedianFilter, RepeatedPassesReachAFixedPoint) {
  for (int n = 1; n <= 12; ++n)
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      std::vector<int> seq(n);
      for (int i = 0; i < n; ++i) seq[i] = (mask >> i) & 1;
      for (int w : {3, 5}) {
        auto cur = seq;
        for (int pass = 0; pass < n; ++pass) cur = median_filter_labels(cur, w);
        EXPECT_EQ(median_filter_labels(cur, w), cur);
      }
    }
}

TEST(Classify, ArgmaxAndThreshold) {
  VideoPrediction v;
  v.scores_are_logits = false;
  v.truth = {FrameLabel::from_physical(1, 0)};
  v.phase_scores = Matrix(1, kNumPhases, Vector{0.1, 0.9, 0, 0, 0, 0, 0});
  v.tool_scores = Matrix(1, kNumTools, Vector{0.5, 0.49, 0, 0, 0, 0, 0, 0.9});
  auto d = classify_from_scores(v);
  EXPECT_EQ(d[0].phase, 1);
  EXPECT_EQ(d[0].tools, 0b1);
  v.tool_scores = Matrix(1, kNumTools, Vector{0.1, 0.2, 0, 0, 0, 0, 0, 0.0});
  d = classify_from_scores(v);
  EXPECT_EQ(d[0].tools, 1u << kNoTool);
}

TEST(Classify, LogitsPassThroughSigmoid) {
  VideoPrediction v;
  v.truth = {FrameLabel::from_physical(0, 0)};
  v.phase_scores = Matrix(1, kNumPhases);
  v.tool_scores = Matrix(1, kNumTools, Vector{0.0, -0.1, 0, 0, 0, 0, 0, 0});
  EXPECT_EQ(classify_from_scores(v)[0].tools & 0x7F, 0b1111101);
}

TEST(Report, ReferenceRows) {
  EXPECT_EQ(reference_value("proposed", "tool", "average_precision"), 0.99);
  EXPECT_EQ(reference_value("proposed", "phase", "average_precision"), 0.857);
  EXPECT_EQ(reference_value("BL6", "phase", "average_recall"), 0.883);
  EXPECT_FALSE(reference_value("BL6", "tool", "average_recall").has_value());
}

TEST(Report, WindowOneLeavesPhaseMetricsUnchanged) {
  SeededRng rng(23);
  std::vector<FrameLabel> truth;
  for (int t = 0; t < 60; ++t)
    truth.push_back(FrameLabel::from_physical(static_cast<std::uint8_t>(t / 9),
                                              static_cast<std::uint8_t>(rng.below(8))));
  const PredictionSet pred{prediction_of(truth, rng)};
  const auto rep = build_report(pred, 1);
  EXPECT_EQ(to_json(rep.phase_raw), to_json(rep.phase_smooth));
  const auto smoothed = build_report(pred, 9);
  EXPECT_NE(to_json(smoothed.phase_raw), to_json(smoothed.phase_smooth));
}

TEST(Report, RatesInUnitIntervalAndVideoOrderIrrelevant) {
  SeededRng rng(24);
  PredictionSet pred;
  for (int v = 0; v < 3; ++v) {
    std::vector<FrameLabel> truth;
    for (int t = 0; t < 40; ++t)
      truth.push_back(FrameLabel::from_physical(static_cast<std::uint8_t>((t + 7 * v) / 8 % 7),
                                                static_cast<std::uint8_t>(rng.below(16))));
    pred.push_back(prediction_of(truth, rng));
    pred.back().video_id = "v" + std::to_string(v);
  }
  const auto rep = build_report(pred);
  const auto j = to_json(rep);
  for (const char* task : {"tool", "phase_raw", "phase_smoothed"})
    for (const auto& c : j[task]["classes"])
      for (const char* m : {"precision", "recall", "accuracy", "ap"}) {
        EXPECT_GE(c[m].get<double>(), 0.0);
        EXPECT_LE(c[m].get<double>(), 1.0);
      }
  EXPECT_EQ(rep.tool.classes.size(), kNumTools);
  std::swap(pred[0], pred[2]);
  const auto permuted = build_report(pred);
  EXPECT_EQ(permuted.tool.mean_ap, rep.tool.mean_ap);
  EXPECT_EQ(permuted.phase_raw.frame_accuracy, rep.phase_raw.frame_accuracy);
  EXPECT_EQ(permuted.phase_smooth.avg_recall, rep.phase_smooth.avg_recall);
  const std::string csv = to_csv(rep);
  EXPECT_NE(csv.find(std::string("tool,proposed,average_precision,n/a,0.98999999999999999,") + kReferenceSource), std::string::npos);
}

TEST(Report, ToolAveragesCoverPhysicalToolsOnly) {
  SeededRng rng(25);
  std::vector<FrameLabel> truth;
  for (int t = 0; t < 30; ++t) truth.push_back(FrameLabel::from_physical(0, static_cast<std::uint8_t>(1 + rng.below(7))));
  const auto rep = build_report(PredictionSet{prediction_of(truth, rng)});
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumPhysicalTools; ++k) sum += rep.tool.classes[k].accuracy;
  EXPECT_NEAR(rep.tool.avg_accuracy, sum / kNumPhysicalTools, 1e-15);
}

}  // namespace
}  // namespace swmt
