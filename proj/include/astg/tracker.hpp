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

// Tracker tool contract: propagate one seed box through a clip into a tube.

#include <optional>
#include <string>

#include "astg/error.hpp"
#include "astg/geometry.hpp"

namespace astg {

// Returns nullopt when nothing could be tracked; throws BackendError on
// transport failures. Implementations must tolerate concurrent calls.
class TrackerBackend {
 public:
  virtual ~TrackerBackend() = default;
  virtual std::optional<Tube> track(const FrameClip& clip, const Box& seed) = 0;
};

struct TrackResult {
  std::optional<Tube> tube;
  std::string failure;  // set when tube is nullopt

  bool ok() const { return tube.has_value(); }
};

// Runs the backend and enforces the contract: the tube spans the whole clip,
// is not empty everywhere, and its seed-frame mask touches the seed box.
// Any violation or backend error becomes a track failure.
inline TrackResult track(const FrameClip& clip, const Box& seed, TrackerBackend& backend) {
  if (seed.frame_index < 0 || seed.frame_index >= clip.size() ||
      !seed.valid_in(clip.width(), clip.height()))
    return {std::nullopt, "seed box outside clip"};
  std::optional<Tube> tube;
  try {
    tube = backend.track(clip, seed);
  } catch (const Error& e) {
    return {std::nullopt, std::string("tracker error: ") + e.what()};
  }
  if (!tube) return {std::nullopt, "tracker found nothing under the seed"};
  if (tube->range() != clip.full_span()) return {std::nullopt, "tube does not span the clip"};
  if (tube->width() != clip.width() || tube->height() != clip.height())
    return {std::nullopt, "tube dimensions differ from the clip"};
  if (tube->all_empty()) return {std::nullopt, "tube is empty on every frame"};
  const Mask seed_mask = Mask::from_box(clip.width(), clip.height(), seed);
  if (mask_iou(seed_mask, *tube->mask_at(seed.frame_index)) <= 0.0)
    return {std::nullopt, "seed-frame mask does not touch the seed box"};
  return {std::move(tube), {}};
}

}  // namespace astg
