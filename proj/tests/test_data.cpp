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

#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "swmt/data.hpp"
#include "test_util.hpp"

namespace swmt {
namespace {

std::string tool_file(const std::vector<std::pair<int, std::string>>& rows) {
  std::string out = "Frame\tGrasper\tBipolar\tHook\tScissors\tClipper\tIrrigator\tSpecimenBag\n";
  for (const auto& [frame, bits] : rows) {
    out += std::to_string(frame);
    for (char c : bits) out += std::string("\t") + c;
    out += '\n';
  }
  return out;
}

/// Expected per-frame tool indicators for one phase: enumerates every subset
/// of drawn tools, applies the keep-top-3 rule, and returns E[bit] for each of
/// the 8 tool rows (no-tool last).
Vector expected_tool_bits(const SyntheticConfig& cfg, std::size_t phase) {
  Vector e(kNumTools, 0.0);
  for (unsigned subset = 0; subset < (1u << kNumPhysicalTools); ++subset) {
    double prob = 1.0;
    std::vector<std::size_t> drawn;
    for (std::size_t t = 0; t < kNumPhysicalTools; ++t) {
      const double q = cfg.emission[t][phase];
      if (subset >> t & 1u) {
        prob *= q;
        drawn.push_back(t);
      } else {
        prob *= 1.0 - q;
      }
    }
    if (prob == 0.0) continue;
    if (drawn.size() > 3) {
      std::stable_sort(drawn.begin(), drawn.end(), [&](std::size_t a, std::size_t b) {
        return cfg.emission[a][phase] > cfg.emission[b][phase];
      });
      drawn.resize(3);
    }
    if (drawn.empty()) e[kNoTool] += prob;
    for (std::size_t t : drawn) e[t] += prob;
  }
  return e;
}

TEST(PhaseFile, ParsesNamesInOrder) {
  const auto p = parse_phase_file("Frame\tPhase\n0\tPreparation\n1 Preparation\n2   CalotTriangleDissection\n");
  EXPECT_EQ(p, (std::vector<int>{0, 0, 1}));
}

TEST(PhaseFile, Errors) {
  const auto msg = testing::error_message_of([] { parse_phase_file("Frame\tPhase\n0\tPreparation\n1\tFoo\n"); });
  EXPECT_NE(msg.find("parse error"), std::string::npos);
  EXPECT_NE(msg.find("line 3"), std::string::npos);
  EXPECT_EQ(testing::error_kind_of([] { parse_phase_file("Frame\tPhase\n"); }), ErrorKind::parse);
  EXPECT_EQ(testing::error_kind_of([] { parse_phase_file(""); }), ErrorKind::parse);
  EXPECT_EQ(testing::error_kind_of([] { parse_phase_file("Frame\tPhase\n0\tPreparation\n2\tPreparation\n"); }),
            ErrorKind::parse);
  EXPECT_EQ(testing::error_kind_of([] { parse_phase_file("Frame\tPhase\n0\tpreparation\n"); }),
            ErrorKind::parse);
}

TEST(ToolFile, ParsesStrideRows) {
  const auto rows = parse_tool_file(tool_file({{0, "1000000"}, {25, "0010001"}, {50, "0000000"}}));
  ASSERT_EQ(rows.bits.size(), 3u);
  EXPECT_EQ(rows.bits[0], 0b0000001);
  EXPECT_EQ(rows.bits[1], 0b1000100);
  EXPECT_EQ(rows.bits[2], 0);
  EXPECT_EQ(rows.frames, (std::vector<std::uint64_t>{0, 25, 50}));
}

TEST(ToolFile, Errors) {
  EXPECT_EQ(testing::error_kind_of([] { parse_tool_file(tool_file({{0, "1000000"}, {25, "2000000"}})); }),
            ErrorKind::parse);
  EXPECT_EQ(testing::error_kind_of([] { parse_tool_file(tool_file({{0, "1000000"}, {30, "1000000"}})); }),
            ErrorKind::parse);
  EXPECT_EQ(testing::error_kind_of([] { parse_tool_file(tool_file({{0, "100000"}})); }), ErrorKind::parse);
  EXPECT_EQ(testing::error_kind_of([] { parse_tool_file("Frame\tGrasper\n0\t1\n"); }), ErrorKind::parse);
}

TEST(RateMatch, SubsamplesAndDerivesNoTool) {
  std::vector<int> phases(75, 0);
  for (int f = 25; f < 50; ++f) phases[f] = 1;
  for (int f = 50; f < 75; ++f) phases[f] = 2;
  const auto rows = parse_tool_file(tool_file({{0, "1000000"}, {25, "0000000"}, {50, "0110000"}}));
  const auto v = rate_match(phases, rows, "v");
  ASSERT_EQ(v.length(), 3u);
  EXPECT_EQ(v.labels[0], FrameLabel::from_physical(0, 0b1));
  EXPECT_EQ(v.labels[1].phase, 1);
  EXPECT_TRUE(v.labels[1].has_tool(kNoTool));
  EXPECT_EQ(v.labels[2], FrameLabel::from_physical(2, 0b110));
  EXPECT_EQ(v.fps, 1.0);
}

TEST(RateMatch, TruncatesToShorterSide) {
  const auto rows = parse_tool_file(tool_file({{0, "1000000"}, {25, "1000000"}, {50, "1000000"}}));
  EXPECT_EQ(rate_match(std::vector<int>(80, 3), rows).length(), 3u);
  EXPECT_EQ(rate_match(std::vector<int>(30, 3), rows).length(), 2u);
}

TEST(RateMatch, Errors) {
  const ToolRows none;
  EXPECT_EQ(testing::error_kind_of([&] { rate_match(std::vector<int>(30, 0), none); }),
            ErrorKind::invalid_argument);
  const auto crowded = parse_tool_file(tool_file({{0, "1111000"}}));
  EXPECT_EQ(testing::error_kind_of([&] { rate_match(std::vector<int>(1, 0), crowded); }),
            ErrorKind::invalid_argument);
}

TEST(Split, FirstHalfCeiling) {
  auto ids_of = [](std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back(synthetic_video_id(i, n));
    return ids;
  };
  const auto ids80 = ids_of(80);
  const auto s80 = split_first_half(ids80);
  EXPECT_EQ(s80.train.size(), 40u);
  EXPECT_EQ(s80.test.size(), 40u);
  EXPECT_EQ(s80.train.front(), "video01");
  EXPECT_EQ(s80.test.front(), "video41");
  const auto ids5 = ids_of(5);
  EXPECT_EQ(split_first_half(ids5).train.size(), 3u);
  const auto ids2 = ids_of(2);
  EXPECT_EQ(split_first_half(ids2).test.size(), 1u);
  const auto ids1 = ids_of(1);
  EXPECT_EQ(testing::error_kind_of([&] { split_first_half(ids1); }), ErrorKind::invalid_argument);
}

TEST(Synthetic, SameSeedIsBitIdentical) {
  const auto cfg = testing::tiny_synthetic();
  const auto a = generate_synthetic(cfg);
  const auto b = generate_synthetic(cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].labels, b[i].labels);
    EXPECT_EQ(*a[i].features, *b[i].features);
  }
  auto other = cfg;
  other.seed += 1;
  const auto c = generate_synthetic(other);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].labels != c[i].labels;
  EXPECT_TRUE(differs);
}

TEST(Synthetic, LabelsSatisfyTheModel) {
  auto cfg = testing::tiny_synthetic(20);
  cfg.emission.assign(kNumPhysicalTools, Vector(kNumPhases, 0.9));
  for (const auto& v : generate_synthetic(cfg)) {
    EXPECT_EQ(v.features->rows(), v.length());
    for (const auto& l : v.labels) {
      EXPECT_TRUE(l.valid());
      EXPECT_EQ(l.physical_count(), std::min(3, l.physical_count()));
    }
  }
}

TEST(Synthetic, ZeroStdGivesFixedDurations) {
  auto cfg = testing::tiny_synthetic(3);
  cfg.duration_std.assign(kNumPhases, 0.0);
  cfg.duration_mean = {3, 4, 5, 6, 7, 8, 9};
  cfg.duration_scale = 1.0;
  for (const auto& v : generate_synthetic(cfg)) {
    std::vector<int> counts(kNumPhases, 0);
    for (const auto& l : v.labels) ++counts[l.phase];
    EXPECT_EQ(counts, (std::vector<int>{3, 4, 5, 6, 7, 8, 9}));
  }
}

TEST(Synthetic, CertainToolFillsItsPhase) {
  auto cfg = testing::tiny_synthetic(2);
  for (auto& row : cfg.emission) row[2] = 0.0;
  cfg.emission[4][2] = 1.0;
  for (const auto& v : generate_synthetic(cfg))
    for (const auto& l : v.labels) {
      if (l.phase == 2) {
        EXPECT_EQ(l.tools, 1u << 4);
      }
    }
}

TEST(Synthetic, FirstPhaseMeanMatchesTableStatistics) {
  SyntheticConfig cfg;
  cfg.n_videos = 100;
  cfg.feature_dim = 1;
  std::size_t frames = 0;
  double sum = 0.0;
  for (const auto& v : generate_synthetic(cfg)) {
    frames += v.length();
    for (const auto& l : v.labels) sum += l.phase == 0;
  }
  ASSERT_GE(frames, 10000u);
  const double mean = sum / static_cast<double>(cfg.n_videos);
  const double standard_error = 95.0 / std::sqrt(static_cast<double>(cfg.n_videos));
  EXPECT_LT(std::abs(mean - 125.0), 3.0 * standard_error) << mean;
}

TEST(Synthetic, CooccurrenceConvergesToEmissionTable) {
  SyntheticConfig cfg;
  cfg.duration_mean.assign(kNumPhases, 100.0);
  cfg.duration_std.assign(kNumPhases, 0.0);
  cfg.n_videos = 72;  // 50,400 frames
  cfg.feature_dim = 1;
  std::vector<FrameLabel> labels;
  for (const auto& v : generate_synthetic(cfg)) labels.insert(labels.end(), v.labels.begin(), v.labels.end());
  ASSERT_GE(labels.size(), 50000u);
  const auto co = build_cooccurrence(labels);
  double worst = 0.0;
  for (std::size_t p = 0; p < kNumPhases; ++p) {
    const Vector e = expected_tool_bits(cfg, p);
    double total = 0.0;
    for (double x : e) total += x;
    for (std::size_t t = 0; t < kNumTools; ++t)
      worst = std::max(worst, std::abs(co.c_hat()(t, p) - e[t] / total));
  }
  EXPECT_LT(worst, 0.02);
}

TEST(Synthetic, InvalidConfigNamesTheField) {
  auto cfg = testing::tiny_synthetic();
  cfg.emission[2][3] = 1.5;
  const auto msg = testing::error_message_of([&] { generate_synthetic(cfg); });
  EXPECT_NE(msg.find("config error"), std::string::npos);
  EXPECT_NE(msg.find("synthetic.emission[2][3]"), std::string::npos);
}

TEST(Jsonl, RoundTripIsExact) {
  const auto videos = generate_synthetic(testing::tiny_synthetic(2));
  for (const auto& v : videos) {
    const auto back = parse_video_jsonl(serialize_video_jsonl(v), v.video_id);
    EXPECT_EQ(back.labels, v.labels);
    EXPECT_EQ(*back.features, *v.features);
  }
}

TEST(Jsonl, RejectsBrokenLines) {
  EXPECT_EQ(testing::error_kind_of([] { parse_video_jsonl("{\"t\":0,\"phase\":9,\"tools\":[0,0,0,0,0,0,0,1]}\n", "v"); }),
            ErrorKind::parse);
  EXPECT_EQ(testing::error_kind_of([] { parse_video_jsonl("{\"t\":0,\"phase\":1,\"tools\":[0,0,0,0,0,0,0,0]}\n", "v"); }),
            ErrorKind::parse);
  EXPECT_EQ(testing::error_kind_of([] { parse_video_jsonl("not json\n", "v"); }), ErrorKind::parse);
  EXPECT_EQ(testing::error_kind_of([] { parse_video_jsonl("", "v"); }), ErrorKind::parse);
}

TEST(Dataset, WriteReadRoundTrip) {
  const testing::TempDir dir;
  Dataset ds;
  ds.videos = generate_synthetic(testing::tiny_synthetic(3));
  write_dataset(dir.path(), ds, "2026-01-01T00:00:00Z");
  const auto back = read_dataset(dir.path());
  ASSERT_EQ(back.videos.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.videos[i].video_id, ds.videos[i].video_id);
    EXPECT_EQ(back.videos[i].labels, ds.videos[i].labels);
    EXPECT_EQ(*back.videos[i].features, *ds.videos[i].features);
  }
  EXPECT_EQ(testing::error_kind_of([&] { read_dataset(dir.path() / "missing"); }), ErrorKind::io);
  EXPECT_EQ(testing::error_kind_of([&] { back.find("nope"); }), ErrorKind::invalid_argument);
}

}  // namespace
}  // namespace swmt
