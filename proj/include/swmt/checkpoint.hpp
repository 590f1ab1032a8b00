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

// Checkpoint file layout:
//
//   "SWMT"                magic, 4 bytes
//   u32 LE                format version
//   u64 LE                header length in bytes
//   header                UTF-8 JSON: config echo, dims, stage, epoch, metric
//                         history, blob table, CRC-32 of the blob section
//   blobs                 little-endian f64 arrays in blob-table order
//
// Scalars whose exact bits matter for resumption (learning rate, scheduler
// best value, pending normal variate) live in the "state" blob rather than in
// JSON text.

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "swmt/codec.hpp"
#include "swmt/config.hpp"
#include "swmt/data.hpp"
#include "swmt/error.hpp"
#include "swmt/model.hpp"
#include "swmt/stats.hpp"
#include "swmt/train.hpp"

namespace swmt {

inline constexpr std::string_view kCheckpointMagic = "SWMT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  PipelineConfig config;
  PipelineState state;
};

namespace detail {

inline std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

inline nlohmann::json history_json(const std::vector<EpochRecord>& h) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : h)
    a.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_loss", r.val_loss}, {"lr", r.lr}});
  return a;
}

inline std::vector<EpochRecord> history_from_json(const nlohmann::json& a) {
  std::vector<EpochRecord> h;
  for (const auto& r : a)
    h.push_back({r.at("epoch").get<int>(), r.at("train_loss").get<double>(),
                 r.at("val_loss").get<double>(), r.at("lr").get<double>()});
  return h;
}

struct BlobWriter {
  nlohmann::json table = nlohmann::json::array();
  std::string bytes;

  void add(const std::string& name, std::span<const double> values) {
    table.push_back({{"name", name}, {"count", values.size()}});
    codec::append_f64_le(bytes, values);
  }

  template <class P>
  void add_params(const std::string& prefix, const P& params) {
    params.for_each_tensor([&](const std::string& name, std::span<const double> v) {
      add(prefix + "." + name, v);
    });
  }
};

class BlobReader {
 public:
  BlobReader(const nlohmann::json& table, std::string_view bytes) {
    std::size_t offset = 0;
    for (const auto& e : table) {
      const auto name = e.at("name").get<std::string>();
      const auto count = e.at("count").get<std::size_t>();
      if (offset + count * 8 > bytes.size())
        fail(ErrorKind::corruption, "blob '" + name + "' runs past the end of the file");
      entries_.push_back({name, codec::read_f64_le(bytes.substr(offset, count * 8))});
      offset += count * 8;
    }
    if (offset != bytes.size()) fail(ErrorKind::corruption, "trailing bytes after the last blob");
  }

  const std::vector<double>& get(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return e.values;
    fail(ErrorKind::corruption, "missing blob '" + name + "'");
  }

  template <class P>
  void fill_params(const std::string& prefix, P& params) const {
    params.for_each_tensor([&](const std::string& name, std::span<double> v) {
      const auto& src = get(prefix + "." + name);
      if (src.size() != v.size())
        fail(ErrorKind::mismatch, "blob '" + prefix + "." + name + "' has the wrong size");
      std::copy(src.begin(), src.end(), v.begin());
    });
  }

 private:
  struct Entry {
    std::string name;
    std::vector<double> values;
  };
  std::vector<Entry> entries_;
};

inline nlohmann::json encoder_dims_json(const EncoderDims& d) {
  return {{"input", d.input}, {"hidden", d.hidden}, {"feature", d.feature}, {"phases", d.phases}, {"tools", d.tools}};
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  const PipelineState& s = ck.state;
  detail::BlobWriter blobs;
  const auto rng = s.rng.snapshot();
  const double scalars[] = {s.lr, s.scheduler.best_val, rng.spare};
  blobs.add("state.scalars", scalars);
  blobs.add_params("encoder", s.encoder);
  blobs.add_params("encoder_velocity", s.encoder_velocity);
  if (s.lstm) {
    blobs.add_params("lstm", *s.lstm);
    blobs.add_params("lstm_velocity", *s.lstm_velocity);
  }

  nlohmann::json header;
  header["format"] = "swmt-checkpoint";
  header["version"] = kCheckpointVersion;
  header["config"] = to_json(ck.config);
  header["encoder_dims"] = detail::encoder_dims_json(s.encoder.dims());
  header["lstm_hidden"] = s.lstm ? s.lstm->dims().hidden : 0;
  header["stage"] = to_string(s.stage);
  header["epoch"] = s.epoch;
  header["scheduler"] = {{"factor", s.scheduler.factor},
                         {"patience", s.scheduler.patience},
                         {"epochs_since_improvement", s.scheduler.epochs_since_improvement}};
  header["rng"] = {{"algorithm", SeededRng::kAlgorithm},
                   {"seed", rng.seed},
                   {"state", rng.state},
                   {"has_spare", rng.has_spare}};
  header["whitening"] = s.whitening ? to_json(*s.whitening) : nlohmann::json();
  header["history"] = {{"stage1", detail::history_json(s.history1)},
                       {"stage2", detail::history_json(s.history2)}};
  header["blobs"] = blobs.table;
  header["checksum"] = {{"algorithm", "crc32"}, {"value", detail::crc32_of(blobs.bytes)}};

  const std::string header_text = header.dump();
  std::string out(kCheckpointMagic);
  codec::append_u32_le(out, kCheckpointVersion);
  codec::append_u64_le(out, header_text.size());
  out += header_text;
  out += blobs.bytes;
  return out;
}

inline Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 4) != kCheckpointMagic)
    fail(ErrorKind::corruption, "not a checkpoint (bad magic)");
  const std::uint32_t version = codec::read_u32_le(bytes, 4);
  if (version != kCheckpointVersion)
    fail(ErrorKind::version, "checkpoint version " + std::to_string(version) +
                                 " is not supported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t header_len = codec::read_u64_le(bytes, 8);
  if (header_len > bytes.size() - 16) fail(ErrorKind::corruption, "truncated checkpoint header");
  const std::string_view header_text = bytes.substr(16, header_len);
  const std::string_view blob_bytes = bytes.substr(16 + header_len);

  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(header_text);
    if (header.at("checksum").at("value").get<std::uint32_t>() != detail::crc32_of(blob_bytes))
      fail(ErrorKind::corruption, "checkpoint checksum mismatch");
    ck.config = pipeline_config_from_json(header.at("config"));
    const detail::BlobReader blobs(header.at("blobs"), blob_bytes);

    PipelineState& s = ck.state;
    const auto& ed = header.at("encoder_dims");
    const EncoderDims dims{ed.at("input").get<std::size_t>(), ed.at("hidden").get<std::size_t>(),
                           ed.at("feature").get<std::size_t>(), ed.at("phases").get<std::size_t>(),
                           ed.at("tools").get<std::size_t>()};
    s.encoder = EncoderParams(dims);
    s.encoder_velocity = EncoderParams(dims);
    blobs.fill_params("encoder", s.encoder);
    blobs.fill_params("encoder_velocity", s.encoder_velocity);
    const auto lstm_hidden = header.at("lstm_hidden").get<std::size_t>();
    if (lstm_hidden > 0) {
      const BiLstmDims ld{dims.feature, lstm_hidden, dims.phases, dims.tools};
      s.lstm = BiLstmParams(ld);
      s.lstm_velocity = BiLstmParams(ld);
      blobs.fill_params("lstm", *s.lstm);
      blobs.fill_params("lstm_velocity", *s.lstm_velocity);
    }
    const auto& scalars = blobs.get("state.scalars");
    if (scalars.size() != 3) fail(ErrorKind::corruption, "state blob has the wrong size");
    s.lr = scalars[0];
    s.stage = stage_from_string(header.at("stage").get<std::string>());
    s.epoch = header.at("epoch").get<int>();
    const auto& sch = header.at("scheduler");
    s.scheduler.factor = sch.at("factor").get<double>();
    s.scheduler.patience = sch.at("patience").get<int>();
    s.scheduler.epochs_since_improvement = sch.at("epochs_since_improvement").get<int>();
    s.scheduler.best_val = scalars[1];
    const auto& rng = header.at("rng");
    if (rng.at("algorithm").get<std::string>() != SeededRng::kAlgorithm)
      fail(ErrorKind::mismatch, "checkpoint uses a different PRNG");
    s.rng.restore({rng.at("seed").get<std::uint64_t>(), rng.at("state").get<std::uint64_t>(),
                   rng.at("has_spare").get<bool>(), scalars[2]});
    if (!header.at("whitening").is_null()) s.whitening = whitening_from_json(header.at("whitening"));
    s.history1 = detail::history_from_json(header.at("history").at("stage1"));
    s.history2 = detail::history_from_json(header.at("history").at("stage2"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::corruption, std::string("checkpoint header: ") + e.what());
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_text_file(path, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_text_file(path));
}

}  // namespace swmt
