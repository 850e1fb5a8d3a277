// Copyright 2026 The astg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Scene segmentation with a mean-absolute-difference content detector, and
// TRA-driven filtering of segments that are irrelevant to the query.

#include <cstdint>
#include <cstdlib>
#include <vector>

#include "astg/agents.hpp"
#include "astg/geometry.hpp"

namespace astg {

inline constexpr double kDefaultSceneThreshold = 20.0;

struct SceneSegment {
  TemporalSpan span;
  int index = 0;

  friend bool operator==(const SceneSegment&, const SceneSegment&) = default;
};

// Mean absolute per-channel difference between consecutive frames a and b.
inline double frame_difference(const FrameClip& clip, int a, int b) {
  const auto& pa = clip[a].pixels;
  const auto& pb = clip[b].pixels;
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < pa.size(); ++i)
    sum += static_cast<std::uint64_t>(std::abs(static_cast<int>(pa[i]) - static_cast<int>(pb[i])));
  return static_cast<double>(sum) / static_cast<double>(pa.size());
}

// A cut sits between frames f-1 and f whenever their difference exceeds
// `threshold`. The returned segments partition [0, T-1].
inline std::vector<SceneSegment> detect_scenes(const FrameClip& clip,
                                               double threshold = kDefaultSceneThreshold) {
  if (clip.empty()) throw GeometryError("detect_scenes: empty clip");
  if (!(threshold > 0.0)) throw GeometryError("detect_scenes: threshold must be positive");
  std::vector<SceneSegment> out;
  int start = 0;
  for (int f = 1; f < clip.size(); ++f) {
    if (frame_difference(clip, f - 1, f) > threshold) {
      out.push_back({{start, f - 1}, static_cast<int>(out.size())});
      start = f;
    }
  }
  out.push_back({{start, clip.size() - 1}, static_cast<int>(out.size())});
  return out;
}

struct SceneFilterResult {
  std::vector<SceneSegment> kept;
  std::vector<SceneJudgement> judgements;  // one per input segment
  bool guard_applied = false;              // everything rejected; input returned
};

// Keeps segments the TRA accepts. A segment whose judgement fails is kept;
// if every segment is rejected, all of them are returned.
inline SceneFilterResult filter_scenes(const std::vector<SceneSegment>& segments,
                                       const FrameClip& clip, const ParsedQuery& q,
                                       AgentBackend& tra, const AgentCallOptions& opts = {}) {
  SceneFilterResult out;
  for (const auto& seg : segments) {
    auto judgement = judge_scene(clip.subclip(seg.span), q, tra, opts);
    if (!judgement.decision || *judgement.decision == Decision::accept) out.kept.push_back(seg);
    out.judgements.push_back(std::move(judgement));
  }
  if (out.kept.empty()) {
    out.kept = segments;
    out.guard_applied = true;
  }
  return out;
}

}  // namespace astg
