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

// Label/feature data model, Cholec80-style annotation ingestion with rate
// matching to 1 fps, splitting, the synthetic workflow generator and the
// on-disk JSON-lines dataset format.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "swmt/codec.hpp"
#include "swmt/error.hpp"
#include "swmt/labels.hpp"
#include "swmt/tensorcore.hpp"

namespace swmt {

inline constexpr int kSourceFps = 25;

struct VideoAnnotation {
  std::string video_id;
  double fps = 1.0;
  std::vector<FrameLabel> labels;
  std::optional<Matrix> features;  // T x D when present

  std::size_t length() const noexcept { return labels.size(); }

  void validate() const {
    if (labels.empty()) fail(ErrorKind::invalid_argument, video_id + ": no labelled frames");
    for (std::size_t t = 0; t < labels.size(); ++t)
      if (!labels[t].valid())
        fail(ErrorKind::invalid_argument,
             video_id + ": frame " + std::to_string(t) + " violates the label model");
    if (features && features->rows() != labels.size())
      fail(ErrorKind::dimension, video_id + ": feature rows do not match label count");
  }
};

// ---------------------------------------------------------------------------
// Cholec80 text annotations

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  while (!out.empty() && detail::split_fields(out.back()).empty()) out.pop_back();
  return out;
}

inline std::uint64_t parse_uint(std::string_view s, std::size_t line_no, const char* what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": bad " + what + " '" +
                               std::string(s) + "'");
  return v;
}

}  // namespace detail

/// Phase ids per source frame (25 fps). Line numbers in errors are 1-based.
inline std::vector<int> parse_phase_file(std::string_view text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) fail(ErrorKind::parse, "phase file is empty");
  std::vector<int> phases;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto fields = detail::split_fields(lines[i]);
    if (fields.empty()) continue;
    if (fields.size() != 2)
      fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected 'frame phase'");
    const auto frame = detail::parse_uint(fields[0], line_no, "frame index");
    if (frame != phases.size())
      fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": frame " +
                                 std::to_string(frame) + " is not consecutive (expected " +
                                 std::to_string(phases.size()) + ")");
    const int id = phase_id_from_name(fields[1]);
    if (id < 0)
      fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": unknown phase '" +
                                 std::string(fields[1]) + "'");
    phases.push_back(id);
  }
  if (phases.empty()) fail(ErrorKind::parse, "phase file has no annotated frames");
  return phases;
}

struct ToolRows {
  std::vector<std::uint64_t> frames;
  std::vector<std::uint8_t> bits;  // 7 physical-tool bits per row
};

inline ToolRows parse_tool_file(std::string_view text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) fail(ErrorKind::parse, "tool file is empty");
  const auto header = detail::split_fields(lines[0]);
  if (header.size() != kNumPhysicalTools + 1)
    fail(ErrorKind::parse, "line 1: expected frame column plus " +
                               std::to_string(kNumPhysicalTools) + " tool columns, got " +
                               std::to_string(header.size()) + " columns");
  ToolRows rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto fields = detail::split_fields(lines[i]);
    if (fields.empty()) continue;
    if (fields.size() != header.size())
      fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": column count " +
                                 std::to_string(fields.size()) + " != header " +
                                 std::to_string(header.size()));
    const auto frame = detail::parse_uint(fields[0], line_no, "frame index");
    const std::uint64_t expected = rows.frames.size() * kSourceFps;
    if (frame != expected)
      fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": frame " +
                                 std::to_string(frame) + " breaks the stride of " +
                                 std::to_string(kSourceFps) + " (expected " +
                                 std::to_string(expected) + ")");
    std::uint8_t bits = 0;
    for (std::size_t k = 0; k < kNumPhysicalTools; ++k) {
      const auto v = fields[k + 1];
      if (v == "1") {
        bits |= static_cast<std::uint8_t>(1u << k);
      } else if (v != "0") {
        fail(ErrorKind::parse, "line " + std::to_string(line_no) + ": non-binary tool value '" +
                                   std::string(v) + "'");
      }
    }
    rows.frames.push_back(frame);
    rows.bits.push_back(bits);
  }
  if (rows.frames.empty()) fail(ErrorKind::parse, "tool file has no annotated frames");
  return rows;
}

/// Writers for the same text formats, used to build ingestion fixtures.
inline std::string format_phase_file(std::span<const int> phases) {
  std::string out = "Frame\tPhase\n";
  for (std::size_t f = 0; f < phases.size(); ++f)
    out += std::to_string(f) + "\t" + std::string(kPhaseNames.at(phases[f])) + "\n";
  return out;
}

inline std::string format_tool_file(const ToolRows& rows) {
  std::string out = "Frame";
  for (std::size_t k = 0; k < kNumPhysicalTools; ++k) out += "\t" + std::string(kToolNames[k]);
  out += '\n';
  for (std::size_t r = 0; r < rows.frames.size(); ++r) {
    out += std::to_string(rows.frames[r]);
    for (std::size_t k = 0; k < kNumPhysicalTools; ++k)
      out += (rows.bits[r] >> k) & 1u ? "\t1" : "\t0";
    out += '\n';
  }
  return out;
}

/// Pairs every 25th phase frame with the tool row annotated at that frame.
inline VideoAnnotation rate_match(std::span<const int> phase_at_source_fps, const ToolRows& tools,
                                  std::string video_id = "video") {
  const std::size_t sampled = (phase_at_source_fps.size() + kSourceFps - 1) / kSourceFps;
  const std::size_t n = std::min(sampled, tools.bits.size());
  if (n == 0) fail(ErrorKind::invalid_argument, video_id + ": no pairable frames");
  VideoAnnotation v;
  v.video_id = std::move(video_id);
  v.fps = 1.0;
  v.labels.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const int phase = phase_at_source_fps[k * kSourceFps];
    auto label = FrameLabel::from_physical(static_cast<std::uint8_t>(phase), tools.bits[k]);
    if (label.physical_count() > kMaxToolsPerFrame)
      fail(ErrorKind::invalid_argument, v.video_id + ": more than " +
                                            std::to_string(kMaxToolsPerFrame) +
                                            " tools at source frame " +
                                            std::to_string(k * kSourceFps));
    v.labels.push_back(label);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Splitting

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// First ceil(n/2) ids train, remainder test; input order is id order.
inline Split split_first_half(std::span<const std::string> ids) {
  if (ids.size() < 2) fail(ErrorKind::invalid_argument, "splitting needs at least 2 videos");
  const std::size_t n_train = (ids.size() + 1) / 2;
  Split s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic workflow generator

struct SyntheticConfig {
  std::size_t n_videos = 40;
  std::vector<int> phase_order = {0, 1, 2, 3, 4, 5, 6};
  // Published per-phase duration statistics in seconds; duration_scale shrinks
  // videos to desk scale.
  std::vector<double> duration_mean = {125, 954, 168, 857, 98, 178, 83};
  std::vector<double> duration_std = {95, 538, 152, 551, 53, 166, 56};
  double duration_scale = 1.0;
  double swap_p5_p6_probability = 0.0;
  // emission[tool][phase]: P(tool present | phase) for the 7 physical tools.
  // Artifact-chosen values, not measured on Cholec80.
  std::vector<std::vector<double>> emission = {
      {0.60, 0.95, 0.60, 0.90, 0.80, 0.50, 0.60},  // Grasper
      {0.00, 0.05, 0.05, 0.10, 0.00, 0.50, 0.05},  // Bipolar
      {0.30, 0.95, 0.05, 0.90, 0.00, 0.10, 0.00},  // Hook
      {0.00, 0.02, 0.40, 0.02, 0.00, 0.00, 0.00},  // Scissors
      {0.00, 0.00, 0.80, 0.00, 0.00, 0.05, 0.00},  // Clipper
      {0.00, 0.02, 0.05, 0.05, 0.00, 0.50, 0.05},  // Irrigator
      {0.00, 0.00, 0.00, 0.00, 0.90, 0.05, 0.90},  // SpecimenBag
  };
  std::size_t feature_dim = 64;
  double embedding_scale = 1.0;
  double noise_sigma = 1.0;
  std::uint64_t seed = 42;

  void validate() const {
    if (n_videos == 0) fail(ErrorKind::config, "synthetic.n_videos must be positive");
    if (feature_dim == 0) fail(ErrorKind::config, "synthetic.feature_dim must be positive");
    if (phase_order.empty()) fail(ErrorKind::config, "synthetic.phase_order is empty");
    for (int p : phase_order)
      if (p < 0 || p >= static_cast<int>(kNumPhases))
        fail(ErrorKind::config, "synthetic.phase_order has an out-of-range phase");
    if (duration_mean.size() != kNumPhases || duration_std.size() != kNumPhases)
      fail(ErrorKind::config, "synthetic duration tables need 7 entries");
    for (std::size_t p = 0; p < kNumPhases; ++p) {
      if (!(duration_mean[p] > 0.0))
        fail(ErrorKind::config, "synthetic.duration_mean[" + std::to_string(p) + "] must be > 0");
      if (!(duration_std[p] >= 0.0))
        fail(ErrorKind::config, "synthetic.duration_std[" + std::to_string(p) + "] must be >= 0");
    }
    if (!(duration_scale > 0.0)) fail(ErrorKind::config, "synthetic.duration_scale must be > 0");
    if (!(swap_p5_p6_probability >= 0.0 && swap_p5_p6_probability <= 1.0))
      fail(ErrorKind::config, "synthetic.swap_p5_p6_probability must lie in [0,1]");
    if (emission.size() != kNumPhysicalTools)
      fail(ErrorKind::config, "synthetic.emission needs 7 tool rows");
    for (std::size_t t = 0; t < emission.size(); ++t) {
      if (emission[t].size() != kNumPhases)
        fail(ErrorKind::config, "synthetic.emission[" + std::to_string(t) + "] needs 7 entries");
      for (std::size_t p = 0; p < kNumPhases; ++p) {
        const double v = emission[t][p];
        if (!(v >= 0.0 && v <= 1.0))
          fail(ErrorKind::config, "synthetic.emission[" + std::to_string(t) + "][" +
                                      std::to_string(p) + "] = " + std::to_string(v) +
                                      " is not a probability");
      }
    }
    if (!(noise_sigma >= 0.0)) fail(ErrorKind::config, "synthetic.noise_sigma must be >= 0");
    if (!(embedding_scale > 0.0)) fail(ErrorKind::config, "synthetic.embedding_scale must be > 0");
  }
};

inline std::string synthetic_video_id(std::size_t index, std::size_t n_videos) {
  const std::size_t width = std::max<std::size_t>(2, std::to_string(n_videos).size());
  std::string num = std::to_string(index + 1);
  return "video" + std::string(width - num.size(), '0') + num;
}

/// Fixed class embeddings shared by every video of one configuration.
struct SyntheticEmbeddings {
  Matrix phase;  // 7 x D
  Matrix tool;   // 7 x D

  static SyntheticEmbeddings make(const SyntheticConfig& cfg) {
    SeededRng rng = SeededRng::child(cfg.seed, 0xE11BEDD1ULL);
    SyntheticEmbeddings e{Matrix(kNumPhases, cfg.feature_dim),
                          Matrix(kNumPhysicalTools, cfg.feature_dim)};
    for (double& x : e.phase.values()) x = rng.normal(0.0, cfg.embedding_scale);
    for (double& x : e.tool.values()) x = rng.normal(0.0, cfg.embedding_scale);
    return e;
  }
};

inline VideoAnnotation generate_synthetic_video(const SyntheticConfig& cfg,
                                                const SyntheticEmbeddings& emb,
                                                std::size_t index) {
  SeededRng rng = SeededRng::child(cfg.seed, index);
  std::vector<int> order = cfg.phase_order;
  if (cfg.swap_p5_p6_probability > 0.0 && rng.uniform() < cfg.swap_p5_p6_probability) {
    auto p5 = std::find(order.begin(), order.end(), 4);
    auto p6 = std::find(order.begin(), order.end(), 5);
    if (p5 != order.end() && p6 != order.end()) std::iter_swap(p5, p6);
  }

  VideoAnnotation v;
  v.video_id = synthetic_video_id(index, cfg.n_videos);
  v.fps = 1.0;
  for (int phase : order) {
    const double mu = cfg.duration_mean[phase] * cfg.duration_scale;
    const double sd = cfg.duration_std[phase] * cfg.duration_scale;
    const double draw = std::round(rng.normal(mu, sd));
    const auto seconds = static_cast<std::size_t>(std::max(1.0, draw));
    for (std::size_t s = 0; s < seconds; ++s) {
      std::uint8_t bits = 0;
      std::vector<std::size_t> drawn;
      for (std::size_t t = 0; t < kNumPhysicalTools; ++t)
        if (rng.uniform() < cfg.emission[t][phase]) drawn.push_back(t);
      if (drawn.size() > static_cast<std::size_t>(kMaxToolsPerFrame)) {
        std::stable_sort(drawn.begin(), drawn.end(), [&](std::size_t a, std::size_t b) {
          return cfg.emission[a][phase] > cfg.emission[b][phase];
        });
        drawn.resize(kMaxToolsPerFrame);
      }
      for (std::size_t t : drawn) bits |= static_cast<std::uint8_t>(1u << t);
      v.labels.push_back(FrameLabel::from_physical(static_cast<std::uint8_t>(phase), bits));
    }
  }

  const std::size_t D = cfg.feature_dim;
  Matrix feats(v.labels.size(), D);
  for (std::size_t t = 0; t < v.labels.size(); ++t) {
    const FrameLabel& l = v.labels[t];
    auto row = feats.row(t);
    const auto ep = emb.phase.row(l.phase);
    for (std::size_t k = 0; k < D; ++k) row[k] = ep[k];
    for (std::size_t tool = 0; tool < kNumPhysicalTools; ++tool) {
      if (!l.has_tool(tool)) continue;
      const auto et = emb.tool.row(tool);
      for (std::size_t k = 0; k < D; ++k) row[k] += et[k];
    }
    for (std::size_t k = 0; k < D; ++k) row[k] += rng.normal(0.0, cfg.noise_sigma);
  }
  v.features = std::move(feats);
  return v;
}

inline std::vector<VideoAnnotation> generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const SyntheticEmbeddings emb = SyntheticEmbeddings::make(cfg);
  std::vector<VideoAnnotation> videos;
  videos.reserve(cfg.n_videos);
  for (std::size_t i = 0; i < cfg.n_videos; ++i)
    videos.push_back(generate_synthetic_video(cfg, emb, i));
  return videos;
}

inline nlohmann::json to_json(const SyntheticConfig& c) {
  return {{"n_videos", c.n_videos},
          {"phase_order", c.phase_order},
          {"duration_mean", c.duration_mean},
          {"duration_std", c.duration_std},
          {"duration_scale", c.duration_scale},
          {"swap_p5_p6_probability", c.swap_p5_p6_probability},
          {"emission", c.emission},
          {"feature_dim", c.feature_dim},
          {"embedding_scale", c.embedding_scale},
          {"noise_sigma", c.noise_sigma},
          {"seed", c.seed}};
}

// ---------------------------------------------------------------------------
// JSON-lines dataset: one file per video, one object per frame
//   {"t": int, "phase": int, "tools": [8 x 0/1], "feature": base64 f64 (optional)}
// plus manifest.json listing the videos.

inline std::string serialize_video_jsonl(const VideoAnnotation& v) {
  std::string out;
  for (std::size_t t = 0; t < v.labels.size(); ++t) {
    nlohmann::json j;
    j["t"] = t;
    j["phase"] = v.labels[t].phase;
    std::vector<int> tools(kNumTools);
    for (std::size_t k = 0; k < kNumTools; ++k) tools[k] = v.labels[t].has_tool(k) ? 1 : 0;
    j["tools"] = tools;
    if (v.features) j["feature"] = codec::encode_f64_base64(v.features->row(t));
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline VideoAnnotation parse_video_jsonl(std::string_view text, std::string video_id) {
  VideoAnnotation v;
  v.video_id = std::move(video_id);
  v.fps = 1.0;
  std::vector<double> feature_values;
  std::size_t feature_dim = 0;
  bool any_feature = false;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = v.video_id + " line " + std::to_string(i + 1);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
      if (j.at("t").get<std::size_t>() != v.labels.size())
        fail(ErrorKind::parse, where + ": frame index is not consecutive");
      const auto phase = j.at("phase").get<int>();
      const auto tools = j.at("tools").get<std::vector<int>>();
      if (phase < 0 || phase >= static_cast<int>(kNumPhases) || tools.size() != kNumTools)
        fail(ErrorKind::parse, where + ": label out of range");
      FrameLabel l{static_cast<std::uint8_t>(phase), 0};
      for (std::size_t k = 0; k < kNumTools; ++k) {
        if (tools[k] != 0 && tools[k] != 1) fail(ErrorKind::parse, where + ": non-binary tool");
        if (tools[k]) l.tools |= static_cast<std::uint8_t>(1u << k);
      }
      if (!l.valid()) fail(ErrorKind::parse, where + ": label violates the tool model");
      v.labels.push_back(l);
      const bool has_feature = j.contains("feature");
      if (i == 0) any_feature = has_feature;
      if (has_feature != any_feature) fail(ErrorKind::parse, where + ": feature presence differs");
      if (has_feature) {
        auto f = codec::decode_f64_base64(j.at("feature").get<std::string>());
        if (feature_dim == 0) feature_dim = f.size();
        if (f.size() != feature_dim || feature_dim == 0)
          fail(ErrorKind::parse, where + ": feature dimension differs");
        feature_values.insert(feature_values.end(), f.begin(), f.end());
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::parse, where + ": " + e.what());
    }
  }
  if (v.labels.empty()) fail(ErrorKind::parse, v.video_id + ": empty video file");
  if (any_feature) v.features = Matrix(v.labels.size(), feature_dim, std::move(feature_values));
  return v;
}

struct Dataset {
  std::vector<VideoAnnotation> videos;
  nlohmann::json generator;  // config echo or null

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& v : videos) out.push_back(v.video_id);
    return out;
  }

  const VideoAnnotation& find(std::string_view id) const {
    for (const auto& v : videos)
      if (v.video_id == id) return v;
    fail(ErrorKind::invalid_argument, "unknown video id '" + std::string(id) + "'");
  }

  std::size_t feature_dim() const {
    if (videos.empty() || !videos.front().features) return 0;
    return videos.front().features->cols();
  }
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorKind::io, "failed reading " + path.string());
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorKind::io, "failed writing " + path.string());
}

/// Writes <dir>/<id>.jsonl per video and <dir>/manifest.json. `created_at` is
/// the only non-deterministic manifest field.
inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds,
                          const std::string& created_at) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json manifest;
  manifest["format"] = "swmt-dataset";
  manifest["version"] = 1;
  manifest["created_at"] = created_at;
  manifest["fps"] = 1.0;
  manifest["n_phases"] = kNumPhases;
  manifest["n_tools"] = kNumTools;
  manifest["feature_dim"] = ds.feature_dim();
  manifest["generator"] = ds.generator;
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : ds.videos) {
    v.validate();
    const std::string file = v.video_id + ".jsonl";
    write_text_file(dir / file, serialize_video_jsonl(v));
    videos.push_back({{"id", v.video_id}, {"file", file}, {"fps", v.fps}, {"frames", v.length()}});
  }
  manifest["videos"] = videos;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path))
    fail(ErrorKind::io, "no manifest.json in " + dir.string());
  Dataset ds;
  try {
    const auto manifest = nlohmann::json::parse(read_text_file(manifest_path));
    ds.generator = manifest.value("generator", nlohmann::json());
    for (const auto& entry : manifest.at("videos")) {
      const auto id = entry.at("id").get<std::string>();
      auto v = parse_video_jsonl(read_text_file(dir / entry.at("file").get<std::string>()), id);
      v.fps = entry.value("fps", 1.0);
      if (v.length() != entry.at("frames").get<std::size_t>())
        fail(ErrorKind::parse, id + ": frame count differs from the manifest");
      ds.videos.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("manifest: ") + e.what());
  }
  if (ds.videos.empty()) fail(ErrorKind::io, "dataset in " + dir.string() + " has no videos");
  const std::size_t d = ds.feature_dim();
  for (const auto& v : ds.videos)
    if ((v.features ? v.features->cols() : 0) != d)
      fail(ErrorKind::parse, v.video_id + ": feature dimension differs across videos");
  return ds;
}

}  // namespace swmt
