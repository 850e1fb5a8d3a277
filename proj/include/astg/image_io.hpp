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

// Image plumbing: PNG encode/decode (libpng), base64 (OpenSSL), nearest
// neighbour resizing, and the frames-directory clip loader.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include <openssl/evp.h>
#include <png.h>

#include <nlohmann/json.hpp>

#include "astg/error.hpp"
#include "astg/geometry.hpp"

namespace astg {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB
};

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw BackendError("base64 length is not a multiple of 4");
  if (text.empty()) return {};
  std::vector<std::uint8_t> out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw BackendError("invalid base64 payload");
  // EVP_DecodeBlock counts padding as data.
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

inline std::vector<std::uint8_t> encode_png(const std::uint8_t* rgb, int width, int height) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, rgb, 0, nullptr))
    throw GeometryError(std::string("png encode failed: ") + image.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, rgb, 0, nullptr))
    throw GeometryError(std::string("png encode failed: ") + image.message);
  out.resize(size);
  return out;
}

inline std::vector<std::uint8_t> encode_png(const RgbImage& img) {
  return encode_png(img.pixels.data(), img.width, img.height);
}

// Any PNG colour type is converted to 8-bit RGB.
inline RgbImage decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw GeometryError(std::string("png decode failed: ") + image.message);
  image.format = PNG_FORMAT_RGB;
  RgbImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw GeometryError(std::string("png decode failed: ") + image.message);
  }
  return out;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GeometryError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path,
                             const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw GeometryError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline RgbImage resize_nearest(const RgbImage& in, int width, int height) {
  if (width <= 0 || height <= 0) throw GeometryError("resize target must be positive");
  RgbImage out{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3)};
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>(static_cast<std::int64_t>(y) * in.height / height);
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>(static_cast<std::int64_t>(x) * in.width / width);
      const auto s = (static_cast<std::size_t>(sy) * in.width + sx) * 3;
      const auto d = (static_cast<std::size_t>(y) * width + x) * 3;
      std::copy_n(in.pixels.begin() + static_cast<std::ptrdiff_t>(s), 3,
                  out.pixels.begin() + static_cast<std::ptrdiff_t>(d));
    }
  }
  return out;
}

// Dimensions after shrinking so the longer side is at most `max_side`;
// images already small enough are left alone.
inline std::pair<int, int> fit_within(int width, int height, int max_side) {
  const int longer = std::max(width, height);
  if (max_side <= 0 || longer <= max_side) return {width, height};
  const double s = static_cast<double>(max_side) / longer;
  return {std::max(1, static_cast<int>(std::lround(width * s))),
          std::max(1, static_cast<int>(std::lround(height * s)))};
}

// Source frame indices kept when resampling `count` frames from `source_fps`
// to `target_fps`. Never upsamples.
inline std::vector<int> resample_indices(int count, double source_fps, double target_fps) {
  std::vector<int> out;
  if (count <= 0) return out;
  if (target_fps >= source_fps) {
    for (int i = 0; i < count; ++i) out.push_back(i);
    return out;
  }
  const double step = source_fps / target_fps;
  for (int k = 0;; ++k) {
    const auto i = static_cast<int>(std::floor(k * step + 1e-9));
    if (i >= count) break;
    out.push_back(i);
  }
  return out;
}

struct FramesDirOptions {
  double sample_fps = 2.0;
  int max_side = 448;  // 0 keeps native size
};

// Loads a directory of numbered PNGs (sorted by the number in the stem) plus
// `meta.json` carrying {"fps": <source fps>}. Frames are resampled to the
// sampling rate and shrunk to the working resolution.
inline FrameClip load_frames_dir(const std::filesystem::path& dir, const FramesDirOptions& opts = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw GeometryError("not a directory: " + dir.string());
  const auto meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) throw GeometryError("missing meta.json in " + dir.string());
  double source_fps = 0.0;
  try {
    std::ifstream in(meta_path);
    source_fps = nlohmann::json::parse(in).at("fps").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw GeometryError(std::string("malformed meta.json: ") + e.what());
  }
  if (!(source_fps > 0.0)) throw GeometryError("meta.json fps must be positive");

  std::vector<std::pair<long, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    const auto stem = entry.path().stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; }))
      throw GeometryError("frame file name is not a number: " + entry.path().filename().string());
    files.emplace_back(std::stol(stem), entry.path());
  }
  if (files.empty()) throw GeometryError("no PNG frames in " + dir.string());
  std::sort(files.begin(), files.end());

  const double fps = std::min(source_fps, opts.sample_fps);
  const auto keep = resample_indices(static_cast<int>(files.size()), source_fps, opts.sample_fps);
  std::vector<Frame> frames;
  int width = 0;
  int height = 0;
  for (int src : keep) {
    RgbImage img = decode_png(read_file_bytes(files[static_cast<std::size_t>(src)].second));
    const auto [w, h] = fit_within(img.width, img.height, opts.max_side);
    if (w != img.width || h != img.height) img = resize_nearest(img, w, h);
    if (frames.empty()) {
      width = img.width;
      height = img.height;
    } else if (img.width != width || img.height != height) {
      throw GeometryError("frames in " + dir.string() + " differ in size");
    }
    frames.push_back({static_cast<int>(frames.size()), src, std::move(img.pixels)});
  }
  return FrameClip(std::move(frames), fps, width, height);
}

// Writes a clip as a frames directory readable by load_frames_dir.
inline void write_frames_dir(const FrameClip& clip, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& f : clip.frames()) {
    char name[32];
    std::snprintf(name, sizeof name, "%06d.png", f.index);
    write_file_bytes(dir / name, encode_png(f.pixels.data(), clip.width(), clip.height()));
  }
  std::ofstream(dir / "meta.json") << nlohmann::json{{"fps", clip.fps()}}.dump() << '\n';
}

}  // namespace astg
