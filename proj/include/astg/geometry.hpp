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

// Frames, boxes, run-length masks, tubes and temporal spans, plus the IoU,
// trim and mask-to-box math every other module builds on.
//
// Coordinates are pixel-space, 0-based and half-open: a box covers
// [x1, x2) x [y1, y2). Frame indices are sampled-frame indices.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "astg/error.hpp"

namespace astg {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct TemporalSpan {
  int st = 0;
  int ed = 0;

  int length() const { return ed - st + 1; }
  bool contains(int f) const { return f >= st && f <= ed; }
  bool valid_in(int frame_count) const {
    return st >= 0 && st <= ed && ed <= frame_count - 1;
  }
  TemporalSpan shifted(int offset) const { return {st + offset, ed + offset}; }

  friend bool operator==(const TemporalSpan&, const TemporalSpan&) = default;
};

inline std::optional<TemporalSpan> intersect(const TemporalSpan& a,
                                             const TemporalSpan& b) {
  const int st = std::max(a.st, b.st);
  const int ed = std::min(a.ed, b.ed);
  if (st > ed) return std::nullopt;
  return TemporalSpan{st, ed};
}

struct Frame {
  int index = 0;         // position inside the owning clip, 0-based
  int source_index = 0;  // index in the originally sampled clip; survives subclips
  std::vector<std::uint8_t> pixels;  // row-major RGB, 3 bytes per pixel
};

class FrameClip {
 public:
  FrameClip() = default;

  FrameClip(std::vector<Frame> frames, double fps, int width, int height)
      : frames_(std::move(frames)), fps_(fps), width_(width), height_(height) {
    if (!(fps_ > 0.0)) throw GeometryError("clip fps must be positive");
    if (width_ <= 0 || height_ <= 0) throw GeometryError("clip dimensions must be positive");
    const auto expected = static_cast<std::size_t>(width_) * height_ * 3;
    for (std::size_t i = 0; i < frames_.size(); ++i) {
      if (frames_[i].index != static_cast<int>(i))
        throw GeometryError("clip frame indices must be contiguous from 0");
      if (frames_[i].pixels.size() != expected)
        throw GeometryError("frame " + std::to_string(i) + " has wrong buffer size");
    }
  }

  int size() const { return static_cast<int>(frames_.size()); }
  bool empty() const { return frames_.empty(); }
  int width() const { return width_; }
  int height() const { return height_; }
  double fps() const { return fps_; }
  TemporalSpan full_span() const { return {0, size() - 1}; }

  const Frame& operator[](int i) const { return frames_.at(static_cast<std::size_t>(i)); }
  const std::vector<Frame>& frames() const { return frames_; }

  Rgb pixel(int frame, int x, int y) const {
    const auto& px = frames_[static_cast<std::size_t>(frame)].pixels;
    const auto o = offset(x, y);
    return {px[o], px[o + 1], px[o + 2]};
  }

  void set_pixel(int frame, int x, int y, Rgb c) {
    auto& px = frames_[static_cast<std::size_t>(frame)].pixels;
    const auto o = offset(x, y);
    px[o] = c.r;
    px[o + 1] = c.g;
    px[o + 2] = c.b;
  }

  // Frames [span.st, span.ed], renumbered from 0. Source indices are kept.
  FrameClip subclip(const TemporalSpan& span) const {
    if (!span.valid_in(size())) throw GeometryError("subclip span outside clip");
    std::vector<Frame> out;
    out.reserve(static_cast<std::size_t>(span.length()));
    for (int f = span.st; f <= span.ed; ++f) {
      Frame copy = frames_[static_cast<std::size_t>(f)];
      copy.index = f - span.st;
      out.push_back(std::move(copy));
    }
    return FrameClip(std::move(out), fps_, width_, height_);
  }

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  std::vector<Frame> frames_;
  double fps_ = 1.0;
  int width_ = 1;
  int height_ = 1;
};

struct Box {
  int frame_index = 0;
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }
  bool valid_in(int w, int h) const {
    return 0 <= x1 && x1 < x2 && x2 <= w && 0 <= y1 && y1 < y2 && y2 <= h;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

inline double box_iou(const Box& a, const Box& b) {
  const std::int64_t iw = std::max(0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const std::int64_t ih = std::max(0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const std::int64_t inter = iw * ih;
  const std::int64_t uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Binary bitmap stored as alternating zero/one run lengths over a
// column-major traversal (pixel (x, y) sits at x * height + y). The first
// run counts zeros and may be 0; every other run is positive.
class Mask {
 public:
  Mask() = default;

  Mask(int frame_index, int width, int height, std::vector<std::uint32_t> counts)
      : frame_index_(frame_index), width_(width), height_(height), counts_(std::move(counts)) {
    if (width_ <= 0 || height_ <= 0) throw GeometryError("mask dimensions must be positive");
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (counts_[i] == 0 && i != 0) throw GeometryError("mask run lengths must be positive");
      total += counts_[i];
    }
    if (total != static_cast<std::uint64_t>(width_) * height_)
      throw GeometryError("mask run lengths do not sum to width*height");
  }

  static Mask empty(int frame_index, int width, int height) {
    return Mask(frame_index, width, height,
                {static_cast<std::uint32_t>(width) * static_cast<std::uint32_t>(height)});
  }

  // Nonzero bytes of a row-major bitmap are foreground.
  static Mask from_bitmap(int frame_index, int width, int height,
                          std::span<const std::uint8_t> row_major) {
    if (row_major.size() != static_cast<std::size_t>(width) * height)
      throw GeometryError("bitmap size does not match mask dimensions");
    std::vector<std::uint32_t> counts;
    bool current = false;
    std::uint32_t run = 0;
    for (int x = 0; x < width; ++x) {
      for (int y = 0; y < height; ++y) {
        const bool v = row_major[static_cast<std::size_t>(y) * width + x] != 0;
        if (v != current) {
          counts.push_back(run);
          run = 0;
          current = v;
        }
        ++run;
      }
    }
    counts.push_back(run);
    return Mask(frame_index, width, height, std::move(counts));
  }

  static Mask from_box(int width, int height, const Box& box) {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(width) * height, 0);
    const int x1 = std::clamp(box.x1, 0, width), x2 = std::clamp(box.x2, 0, width);
    const int y1 = std::clamp(box.y1, 0, height), y2 = std::clamp(box.y2, 0, height);
    for (int y = y1; y < y2; ++y)
      for (int x = x1; x < x2; ++x) bits[static_cast<std::size_t>(y) * width + x] = 1;
    return from_bitmap(box.frame_index, width, height, bits);
  }

  // Row-major 0/1 bitmap.
  std::vector<std::uint8_t> to_bitmap() const {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(width_) * height_, 0);
    for_each_foreground_run([&](std::uint64_t start, std::uint64_t len) {
      for (std::uint64_t p = start; p < start + len; ++p) {
        const auto x = static_cast<std::size_t>(p / static_cast<std::uint64_t>(height_));
        const auto y = static_cast<std::size_t>(p % static_cast<std::uint64_t>(height_));
        bits[y * static_cast<std::size_t>(width_) + x] = 1;
      }
    });
    return bits;
  }

  // Calls fn(start, length) for each run of ones, in column-major positions.
  template <class Fn>
  void for_each_foreground_run(Fn&& fn) const {
    std::uint64_t pos = 0;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      if (i % 2 == 1) fn(pos, static_cast<std::uint64_t>(counts_[i]));
      pos += counts_[i];
    }
  }

  std::int64_t area() const {
    std::int64_t a = 0;
    for (std::size_t i = 1; i < counts_.size(); i += 2) a += counts_[i];
    return a;
  }
  bool is_empty() const { return counts_.size() <= 1; }

  int frame_index() const { return frame_index_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<std::uint32_t>& counts() const { return counts_; }

  Mask with_frame_index(int f) const {
    Mask m = *this;
    m.frame_index_ = f;
    return m;
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int frame_index_ = 0;
  int width_ = 1;
  int height_ = 1;
  std::vector<std::uint32_t> counts_{1};
};

namespace detail {

struct Interval {
  std::uint64_t begin;
  std::uint64_t end;
};

inline std::vector<Interval> foreground_intervals(const Mask& m) {
  std::vector<Interval> out;
  m.for_each_foreground_run(
      [&](std::uint64_t s, std::uint64_t len) { out.push_back({s, s + len}); });
  return out;
}

}  // namespace detail

// Set IoU of two bitmaps computed directly on the runs. Two empty masks are
// considered identical (1.0).
inline double mask_iou(const Mask& a, const Mask& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw GeometryError("mask_iou: dimension mismatch");
  const auto ra = detail::foreground_intervals(a);
  const auto rb = detail::foreground_intervals(b);
  std::uint64_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < ra.size() && j < rb.size()) {
    const auto lo = std::max(ra[i].begin, rb[j].begin);
    const auto hi = std::min(ra[i].end, rb[j].end);
    if (lo < hi) inter += hi - lo;
    if (ra[i].end < rb[j].end) ++i; else ++j;
  }
  const auto uni = static_cast<std::uint64_t>(a.area() + b.area()) - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Per-frame masks of one entity over a contiguous frame range. Frames where
// the entity is not visible carry empty masks.
class Tube {
 public:
  Tube() = default;

  Tube(std::string id, int first, std::vector<Mask> masks)
      : id_(std::move(id)), first_(first), masks_(std::move(masks)) {
    if (masks_.empty()) throw GeometryError("tube needs at least one frame");
    for (std::size_t i = 0; i < masks_.size(); ++i) {
      if (masks_[i].frame_index() != first_ + static_cast<int>(i))
        throw GeometryError("tube masks must cover a contiguous frame range");
      if (masks_[i].width() != masks_[0].width() || masks_[i].height() != masks_[0].height())
        throw GeometryError("tube masks must share dimensions");
    }
  }

  const std::string& id() const { return id_; }
  int first() const { return first_; }
  int last() const { return first_ + static_cast<int>(masks_.size()) - 1; }
  TemporalSpan range() const { return {first(), last()}; }
  int width() const { return masks_.empty() ? 0 : masks_[0].width(); }
  int height() const { return masks_.empty() ? 0 : masks_[0].height(); }
  const std::vector<Mask>& masks() const { return masks_; }

  const Mask* mask_at(int f) const {
    if (masks_.empty() || f < first() || f > last()) return nullptr;
    return &masks_[static_cast<std::size_t>(f - first_)];
  }

  bool all_empty() const {
    return std::all_of(masks_.begin(), masks_.end(), [](const Mask& m) { return m.is_empty(); });
  }

  Tube shifted(int offset) const {
    std::vector<Mask> moved;
    moved.reserve(masks_.size());
    for (const auto& m : masks_) moved.push_back(m.with_frame_index(m.frame_index() + offset));
    return Tube(id_, first_ + offset, std::move(moved));
  }

  Tube with_id(std::string id) const {
    Tube t = *this;
    t.id_ = std::move(id);
    return t;
  }

  friend bool operator==(const Tube&, const Tube&) = default;

 private:
  std::string id_;
  int first_ = 0;
  std::vector<Mask> masks_;
};

// Mean per-frame mask IoU over the union of both frame ranges. A frame
// covered by only one tube is scored as if the other side held an empty mask.
inline double tube_iou(const Tube& a, const Tube& b) {
  if (a.masks().empty() || b.masks().empty()) return 0.0;
  if (a.width() != b.width() || a.height() != b.height())
    throw GeometryError("tube_iou: tubes come from different clips");
  const int lo = std::min(a.first(), b.first());
  const int hi = std::max(a.last(), b.last());
  double sum = 0.0;
  for (int f = lo; f <= hi; ++f) {
    const Mask* ma = a.mask_at(f);
    const Mask* mb = b.mask_at(f);
    if (ma && mb) {
      sum += mask_iou(*ma, *mb);
    } else {
      const Mask* only = ma ? ma : mb;
      sum += (only == nullptr || only->is_empty()) ? 1.0 : 0.0;
    }
  }
  return sum / static_cast<double>(hi - lo + 1);
}

// Restricts a tube to [span.st, span.ed]. Throws when the ranges are disjoint.
inline Tube trim(const Tube& t, const TemporalSpan& span) {
  const auto overlap = intersect(t.range(), span);
  if (!overlap) throw GeometryError("trim: span does not overlap the tube");
  std::vector<Mask> kept(t.masks().begin() + (overlap->st - t.first()),
                         t.masks().begin() + (overlap->ed - t.first() + 1));
  return Tube(t.id(), overlap->st, std::move(kept));
}

// Tight bounding box of all foreground pixels, no morphology.
inline std::optional<Box> tight_box(const Mask& m) {
  if (m.is_empty()) return std::nullopt;
  const auto h = static_cast<std::uint64_t>(m.height());
  Box box{m.frame_index(), m.width(), m.height(), 0, 0};
  m.for_each_foreground_run([&](std::uint64_t s, std::uint64_t len) {
    const auto e = s + len - 1;
    const int xs = static_cast<int>(s / h), xe = static_cast<int>(e / h);
    box.x1 = std::min(box.x1, xs);
    box.x2 = std::max(box.x2, xe + 1);
    if (xs == xe) {
      box.y1 = std::min(box.y1, static_cast<int>(s % h));
      box.y2 = std::max(box.y2, static_cast<int>(e % h) + 1);
    } else {
      box.y1 = 0;
      box.y2 = m.height();
    }
  });
  return box;
}

namespace detail {

// 3x3 erosion (outside the image counts as background) or dilation.
inline std::vector<std::uint8_t> morph3x3(const std::vector<std::uint8_t>& in, int w, int h,
                                          bool erode) {
  std::vector<std::uint8_t> out(in.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool acc = erode;
      for (int dy = -1; dy <= 1 && acc == erode; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          const bool v = nx >= 0 && ny >= 0 && nx < w && ny < h &&
                         in[static_cast<std::size_t>(ny) * w + nx] != 0;
          if (erode && !v) { acc = false; break; }
          if (!erode && v) { acc = true; break; }
        }
      }
      out[static_cast<std::size_t>(y) * w + x] = acc ? 1 : 0;
    }
  }
  return out;
}

}  // namespace detail

// Box for evaluation: one 3x3 opening, then the largest 4-connected
// component (first in row-major scan order on ties), then its tight box.
inline std::optional<Box> mask_to_box(const Mask& m) {
  if (m.is_empty()) return std::nullopt;
  const int w = m.width(), h = m.height();
  const auto opened = detail::morph3x3(detail::morph3x3(m.to_bitmap(), w, h, true), w, h, false);

  std::vector<int> label(opened.size(), 0);
  std::vector<std::size_t> stack;
  std::optional<Box> best;
  std::int64_t best_size = 0;
  int next = 0;
  for (std::size_t start = 0; start < opened.size(); ++start) {
    if (!opened[start] || label[start]) continue;
    ++next;
    label[start] = next;
    stack.push_back(start);
    std::int64_t size = 0;
    Box box{m.frame_index(), w, h, 0, 0};
    while (!stack.empty()) {
      const auto p = stack.back();
      stack.pop_back();
      ++size;
      const int x = static_cast<int>(p % static_cast<std::size_t>(w));
      const int y = static_cast<int>(p / static_cast<std::size_t>(w));
      box.x1 = std::min(box.x1, x);
      box.y1 = std::min(box.y1, y);
      box.x2 = std::max(box.x2, x + 1);
      box.y2 = std::max(box.y2, y + 1);
      const std::pair<int, int> nbrs[] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (auto [nx, ny] : nbrs) {
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const auto q = static_cast<std::size_t>(ny) * w + nx;
        if (opened[q] && !label[q]) {
          label[q] = next;
          stack.push_back(q);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best = box;
    }
  }
  return best;
}

// RLE JSON: {"size": [H, W], "counts": [...]}. The frame index travels
// outside this object.
inline nlohmann::json mask_to_json(const Mask& m) {
  return {{"size", {m.height(), m.width()}}, {"counts", m.counts()}};
}

inline Mask mask_from_json(const nlohmann::json& j, int frame_index) {
  try {
    const auto& size = j.at("size");
    if (!size.is_array() || size.size() != 2 || !size[0].is_number_integer() ||
        !size[1].is_number_integer())
      throw GeometryError("RLE size must be [H, W]");
    const auto& counts = j.at("counts");
    if (!counts.is_array()) throw GeometryError("RLE counts must be an array");
    std::vector<std::uint32_t> runs;
    runs.reserve(counts.size());
    for (const auto& c : counts) {
      if (!c.is_number_unsigned()) throw GeometryError("RLE counts must be non-negative integers");
      runs.push_back(c.get<std::uint32_t>());
    }
    return Mask(frame_index, size[1].get<int>(), size[0].get<int>(), std::move(runs));
  } catch (const nlohmann::json::exception& e) {
    throw GeometryError(std::string("malformed RLE mask: ") + e.what());
  }
}

inline nlohmann::json box_to_json(const Box& b) { return {b.x1, b.y1, b.x2, b.y2}; }

inline Box box_from_json(const nlohmann::json& j, int frame_index) {
  if (!j.is_array() || j.size() != 4) throw GeometryError("box must be [x1, y1, x2, y2]");
  for (const auto& v : j)
    if (!v.is_number_integer()) throw GeometryError("box coordinates must be integers");
  try {
    return {frame_index, j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
  } catch (const nlohmann::json::exception& e) {
    throw GeometryError(std::string("malformed box: ") + e.what());
  }
}

inline nlohmann::json span_to_json(const TemporalSpan& s) { return {s.st, s.ed}; }

inline TemporalSpan span_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    throw GeometryError("span must be [st, ed]");
  try {
    return {j[0].get<int>(), j[1].get<int>()};
  } catch (const nlohmann::json::exception& e) {
    throw GeometryError(std::string("malformed span: ") + e.what());
  }
}

}  // namespace astg
