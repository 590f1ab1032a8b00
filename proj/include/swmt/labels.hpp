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

#include <array>
#include <bit>
#include <cstdint>
#include <string>
#include <string_view>

#include "swmt/tensorcore.hpp"

namespace swmt {

inline constexpr std::size_t kNumPhases = 7;
inline constexpr std::size_t kNumPhysicalTools = 7;
inline constexpr std::size_t kNumTools = 8;  // physical tools + no-tool
inline constexpr std::size_t kNoTool = 7;
inline constexpr int kMaxToolsPerFrame = 3;

inline constexpr std::array<std::string_view, kNumPhases> kPhaseNames = {
    "Preparation",           "CalotTriangleDissection", "ClippingCutting",
    "GallbladderDissection", "GallbladderPackaging",    "CleaningCoagulation",
    "GallbladderRetraction"};

inline constexpr std::array<std::string_view, kNumTools> kToolNames = {
    "Grasper", "Bipolar", "Hook", "Scissors", "Clipper", "Irrigator", "SpecimenBag", "NoTool"};

/// Ground truth of one frame: a phase index and a tool bitmask where bit i is
/// tool i and bit 7 is the derived no-tool class.
struct FrameLabel {
  std::uint8_t phase = 0;
  std::uint8_t tools = 1u << kNoTool;

  static FrameLabel from_physical(std::uint8_t phase, std::uint8_t physical_bits) {
    physical_bits &= 0x7F;
    return {phase, static_cast<std::uint8_t>(
                       physical_bits == 0 ? (1u << kNoTool) : physical_bits)};
  }

  bool has_tool(std::size_t i) const noexcept { return (tools >> i) & 1u; }
  std::uint8_t physical_bits() const noexcept { return tools & 0x7F; }
  int physical_count() const noexcept { return std::popcount(physical_bits()); }

  bool valid() const noexcept {
    const bool no_tool = has_tool(kNoTool);
    return phase < kNumPhases && no_tool == (physical_bits() == 0) &&
           physical_count() <= kMaxToolsPerFrame;
  }

  Vector phase_one_hot() const {
    Vector v(kNumPhases, 0.0);
    v[phase] = 1.0;
    return v;
  }

  Vector tool_multi_hot() const {
    Vector v(kNumTools, 0.0);
    for (std::size_t i = 0; i < kNumTools; ++i) v[i] = has_tool(i) ? 1.0 : 0.0;
    return v;
  }

  friend bool operator==(const FrameLabel&, const FrameLabel&) = default;
};

inline int phase_id_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kPhaseNames.size(); ++i)
    if (kPhaseNames[i] == name) return static_cast<int>(i);
  return -1;
}

}  // namespace swmt
