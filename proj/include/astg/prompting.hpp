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

// Visual prompts rasterized onto frames: a mask outline plus label for the
// candidate (spatial prompt) and the frame index as "#<n>" (temporal prompt).
// Rendering is integer-only and uses an embedded 3x5 bitmap font, so the
// output is bit-exact everywhere.

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "astg/geometry.hpp"

namespace astg {

enum class Corner { top_left, top_right, bottom_left, bottom_right };

struct PromptStyle {
  Rgb outline_color{255, 0, 0};
  int outline_width = 3;
  std::string label_text;
  Corner index_corner = Corner::top_left;
  int glyph_size = 2;  // pixels per font cell
  Rgb text_color{255, 255, 255};
  Rgb text_background{0, 0, 0};
};

namespace font {

inline constexpr int kCols = 3;
inline constexpr int kRows = 5;
inline constexpr int kAdvance = kCols + 1;

// Rows top to bottom, 3 bits each, MSB = leftmost column. nullptr for
// characters outside the set (rendered as blank space).
inline const std::array<std::uint8_t, kRows>* glyph(char c) {
  static constexpr std::array<std::array<std::uint8_t, kRows>, 11> kGlyphs = {{
      {7, 5, 5, 5, 7},  // 0
      {2, 6, 2, 2, 7},  // 1
      {7, 1, 7, 4, 7},  // 2
      {7, 1, 7, 1, 7},  // 3
      {5, 5, 7, 1, 1},  // 4
      {7, 4, 7, 1, 7},  // 5
      {7, 4, 7, 5, 7},  // 6
      {7, 1, 1, 1, 1},  // 7
      {7, 5, 7, 5, 7},  // 8
      {7, 5, 7, 1, 7},  // 9
      {5, 7, 5, 7, 5},  // #
  }};
  if (c >= '0' && c <= '9') return &kGlyphs[static_cast<std::size_t>(c - '0')];
  if (c == '#') return &kGlyphs[10];
  return nullptr;
}

inline int text_width(std::string_view text, int scale) {
  if (text.empty()) return 0;
  return (static_cast<int>(text.size()) * kAdvance - 1) * scale;
}

inline int text_height(int scale) { return kRows * scale; }

}  // namespace font

namespace detail {

// Draws glyph-on pixels of `text` with its top-left at (x0, y0), clipped.
inline void draw_text(FrameClip& clip, int frame, int x0, int y0, std::string_view text,
                      int scale, Rgb color) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto* g = font::glyph(text[i]);
    if (g == nullptr) continue;
    const int gx = x0 + static_cast<int>(i) * font::kAdvance * scale;
    for (int row = 0; row < font::kRows; ++row) {
      for (int col = 0; col < font::kCols; ++col) {
        if (!(((*g)[static_cast<std::size_t>(row)] >> (font::kCols - 1 - col)) & 1)) continue;
        for (int dy = 0; dy < scale; ++dy) {
          for (int dx = 0; dx < scale; ++dx) {
            const int x = gx + col * scale + dx, y = y0 + row * scale + dy;
            if (x >= 0 && y >= 0 && x < clip.width() && y < clip.height())
              clip.set_pixel(frame, x, y, color);
          }
        }
      }
    }
  }
}

}  // namespace detail

// Row-major footprint of the outline: the mask's inner boundary (pixels with
// a 4-neighbour outside the mask or the image) dilated by a width x width
// square.
inline std::vector<std::uint8_t> outline_pixels(const Mask& m, int width) {
  const int w = m.width(), h = m.height();
  const auto bits = m.to_bitmap();
  auto at = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h && bits[static_cast<std::size_t>(y) * w + x];
  };
  std::vector<std::uint8_t> out(bits.size(), 0);
  const int lo = -(width - 1) / 2, hi = width / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!at(x, y)) continue;
      if (at(x - 1, y) && at(x + 1, y) && at(x, y - 1) && at(x, y + 1)) continue;
      for (int dy = lo; dy <= hi; ++dy) {
        for (int dx = lo; dx <= hi; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx >= 0 && ny >= 0 && nx < w && ny < h) out[static_cast<std::size_t>(ny) * w + nx] = 1;
        }
      }
    }
  }
  return out;
}

// Outlines the tube's mask on every frame where it is non-empty and writes
// style.label_text next to the mask's top-left corner. Other frames are
// copied unchanged.
inline FrameClip spatial_prompt(const FrameClip& clip, const Tube& tube,
                                const PromptStyle& style = {}) {
  FrameClip out = clip;
  const int width = std::max(1, style.outline_width);
  const int scale = std::max(1, style.glyph_size);
  for (int f = 0; f < clip.size(); ++f) {
    const Mask* m = tube.mask_at(f);
    if (m == nullptr || m->is_empty()) continue;
    if (m->width() != clip.width() || m->height() != clip.height())
      throw GeometryError("spatial_prompt: tube and clip dimensions differ");
    const auto ring = outline_pixels(*m, width);
    for (int y = 0; y < clip.height(); ++y)
      for (int x = 0; x < clip.width(); ++x)
        if (ring[static_cast<std::size_t>(y) * clip.width() + x])
          out.set_pixel(f, x, y, style.outline_color);
    if (!style.label_text.empty()) {
      const auto box = *tight_box(*m);
      const int pad = width / 2 + 1;
      int ty = box.y1 - pad - font::text_height(scale);
      if (ty < 0) ty = box.y1 + pad;
      detail::draw_text(out, f, box.x1, ty, style.label_text, scale, style.outline_color);
    }
  }
  return out;
}

// Rectangle covered by the "#<index>" tag on a frame of the given size:
// the text plus one font cell of padding, anchored at the style's corner.
inline Box temporal_tag_box(int frame_index, int width, int height, const PromptStyle& style = {}) {
  const int scale = std::max(1, style.glyph_size);
  const std::string text = "#" + std::to_string(frame_index);
  const int bw = font::text_width(text, scale) + 2 * scale;
  const int bh = font::text_height(scale) + 2 * scale;
  const bool right = style.index_corner == Corner::top_right ||
                     style.index_corner == Corner::bottom_right;
  const bool bottom = style.index_corner == Corner::bottom_left ||
                      style.index_corner == Corner::bottom_right;
  const int x1 = right ? width - bw : 0;
  const int y1 = bottom ? height - bh : 0;
  return {frame_index, x1, y1, x1 + bw, y1 + bh};
}

// Stamps "#<frame index>" at a fixed corner of every frame.
inline FrameClip temporal_prompt(const FrameClip& clip, const PromptStyle& style = {}) {
  FrameClip out = clip;
  const int scale = std::max(1, style.glyph_size);
  for (int f = 0; f < clip.size(); ++f) {
    const Box tag = temporal_tag_box(f, clip.width(), clip.height(), style);
    for (int y = std::max(0, tag.y1); y < std::min(clip.height(), tag.y2); ++y)
      for (int x = std::max(0, tag.x1); x < std::min(clip.width(), tag.x2); ++x)
        out.set_pixel(f, x, y, style.text_background);
    detail::draw_text(out, f, tag.x1 + scale, tag.y1 + scale, "#" + std::to_string(f), scale,
                      style.text_color);
  }
  return out;
}

}  // namespace astg
