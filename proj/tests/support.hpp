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

// Shared fixtures for the test suites: hand-rolled random generators,
// brute-force reference implementations, and small clip builders.

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <iterator>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "astg/astg.hpp"

namespace astg::testing {

using Rng = std::mt19937_64;

inline int uniform(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline FrameClip solid_clip(int frames, int w, int h, Rgb c, double fps = 2.0) {
  std::vector<Frame> fs;
  for (int i = 0; i < frames; ++i) {
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
    for (std::size_t p = 0; p < px.size(); p += 3) {
      px[p] = c.r;
      px[p + 1] = c.g;
      px[p + 2] = c.b;
    }
    fs.push_back({i, i, std::move(px)});
  }
  return FrameClip(std::move(fs), fps, w, h);
}

// Row-major bitmap; `density` is the foreground probability per pixel.
inline std::vector<std::uint8_t> random_bitmap(Rng& rng, int w, int h, double density) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h);
  for (auto& b : bits) b = uniform01(rng) < density ? 1 : 0;
  return bits;
}

// Random blobby bitmap: a union of a few rectangles, sometimes empty.
inline std::vector<std::uint8_t> random_blobs(Rng& rng, int w, int h) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h, 0);
  const int n = uniform(rng, 0, 3);
  for (int k = 0; k < n; ++k) {
    const int x1 = uniform(rng, 0, w - 1), y1 = uniform(rng, 0, h - 1);
    const int x2 = uniform(rng, x1 + 1, w), y2 = uniform(rng, y1 + 1, h);
    for (int y = y1; y < y2; ++y)
      for (int x = x1; x < x2; ++x) bits[static_cast<std::size_t>(y) * w + x] = 1;
  }
  return bits;
}

inline Mask mask_of(int frame, int w, int h, const std::vector<std::uint8_t>& bits) {
  return Mask::from_bitmap(frame, w, h, bits);
}

inline Box random_box(Rng& rng, int frame, int w, int h) {
  const int x1 = uniform(rng, 0, w - 1), y1 = uniform(rng, 0, h - 1);
  return {frame, x1, y1, uniform(rng, x1 + 1, w), uniform(rng, y1 + 1, h)};
}

// Pixel-loop IoU of two row-major bitmaps; both empty counts as identical.
inline double naive_bitmap_iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::int64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// Pixel-loop box IoU over a large enough canvas.
inline double naive_box_iou(const Box& a, const Box& b) {
  std::int64_t inter = 0, uni = 0;
  const int x_hi = std::max(a.x2, b.x2), y_hi = std::max(a.y2, b.y2);
  for (int y = 0; y < y_hi; ++y) {
    for (int x = 0; x < x_hi; ++x) {
      const bool in_a = x >= a.x1 && x < a.x2 && y >= a.y1 && y < a.y2;
      const bool in_b = x >= b.x1 && x < b.x2 && y >= b.y1 && y < b.y2;
      inter += (in_a && in_b) ? 1 : 0;
      uni += (in_a || in_b) ? 1 : 0;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline Tube random_tube(Rng& rng, const std::string& id, int first, int len, int w, int h) {
  std::vector<Mask> masks;
  for (int f = first; f < first + len; ++f) masks.push_back(mask_of(f, w, h, random_blobs(rng, w, h)));
  return Tube(id, first, std::move(masks));
}

// Per-frame average over the union of ranges; a frame present on one side
// only is compared against an all-zero bitmap.
inline double naive_tube_iou(const Tube& a, const Tube& b) {
  const int lo = std::min(a.first(), b.first()), hi = std::max(a.last(), b.last());
  const std::vector<std::uint8_t> blank(static_cast<std::size_t>(a.width()) * a.height(), 0);
  double sum = 0.0;
  for (int f = lo; f <= hi; ++f) {
    const auto ba = a.mask_at(f) ? a.mask_at(f)->to_bitmap() : blank;
    const auto bb = b.mask_at(f) ? b.mask_at(f)->to_bitmap() : blank;
    sum += naive_bitmap_iou(ba, bb);
  }
  return sum / (hi - lo + 1);
}

// Set-based reference for vIoU: builds explicit frame sets.
inline double naive_viou(const GroundTruth& g, const Prediction& p) {
  std::set<int> gf, pf, inter, uni;
  for (int f = g.span.st; f <= g.span.ed; ++f) gf.insert(f);
  for (int f = p.span.st; f <= p.span.ed; ++f) pf.insert(f);
  std::set_intersection(gf.begin(), gf.end(), pf.begin(), pf.end(), std::inserter(inter, inter.begin()));
  std::set_union(gf.begin(), gf.end(), pf.begin(), pf.end(), std::inserter(uni, uni.begin()));
  double sum = 0.0;
  for (int f : inter) {
    auto gi = g.boxes.find(f);
    auto pi = p.boxes.find(f);
    if (gi != g.boxes.end() && pi != p.boxes.end()) sum += naive_box_iou(gi->second, pi->second);
  }
  return uni.empty() ? 0.0 : sum / static_cast<double>(uni.size());
}

inline double naive_tiou(const TemporalSpan& a, const TemporalSpan& b) {
  std::set<int> sa, sb;
  for (int f = a.st; f <= a.ed; ++f) sa.insert(f);
  for (int f = b.st; f <= b.ed; ++f) sb.insert(f);
  int inter = 0;
  for (int f : sa) inter += sb.count(f) ? 1 : 0;
  const auto uni = sa.size() + sb.size() - static_cast<std::size_t>(inter);
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

inline std::string clip_hash(const FrameClip& clip) {
  std::vector<std::uint8_t> all;
  for (const auto& f : clip.frames()) all.insert(all.end(), f.pixels.begin(), f.pixels.end());
  return sha256_hex(all.data(), all.size());
}

inline std::string text_hash(const std::string& s) { return sha256_hex(s.data(), s.size()); }

// Agent backend answering every role with fixed values; used where the test
// only cares about control flow.
struct FixedAgent {
  std::optional<Box> box;
  Decision verify = Decision::reject;
  Decision scene = Decision::accept;
  std::pair<int, int> span{0, 0};
  bool span_full = true;
  std::string caption = "fixed caption";

  AgentResponse operator()(const AgentRequest& req) const {
    AgentResponse r;
    switch (req.role) {
      case AgentRole::parse:
        r.parsed = split_query(req.query.raw);
        break;
      case AgentRole::propose:
        r.box = box;
        break;
      case AgentRole::scene_judge:
        r.decision = scene;
        r.caption = caption;
        break;
      case AgentRole::verify:
        r.decision = verify;
        r.caption = caption;
        break;
      case AgentRole::localize_grounded:
      case AgentRole::localize_ungrounded:
        r.span = span_full ? std::pair{0, static_cast<int>(req.frames.size()) - 1} : span;
        r.caption = caption;
        break;
    }
    return r;
  }
};

// Tracker returning a fixed box-shaped tube over the whole clip, or nothing.
class BoxTracker : public TrackerBackend {
 public:
  std::optional<Tube> track(const FrameClip& clip, const Box& seed) override {
    ++calls;
    if (fail) return std::nullopt;
    std::vector<Mask> masks;
    for (int f = 0; f < clip.size(); ++f) {
      Box b = seed;
      b.frame_index = f;
      masks.push_back(Mask::from_box(clip.width(), clip.height(), b));
    }
    return Tube("box@" + std::to_string(seed.x1) + "," + std::to_string(seed.y1), 0, std::move(masks));
  }

  bool fail = false;
  int calls = 0;
};

}  // namespace astg::testing
