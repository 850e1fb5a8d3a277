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

// Synthetic grounding episodes with exact ground truth. Entities are solid
// colored rectangles on piecewise-linear paths; scene cuts are instant
// background changes; the query names the target by color and describes the
// motion it performs during the ground-truth span. Oracle agent and tracker
// backends answer from the script, optionally degraded by a FaultSpec.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "astg/agent_backend.hpp"
#include "astg/error.hpp"
#include "astg/geometry.hpp"
#include "astg/query.hpp"
#include "astg/tracker.hpp"

namespace astg::sim {

struct NamedColor {
  std::string name;
  Rgb rgb;
};

inline const std::vector<NamedColor>& entity_palette() {
  static const std::vector<NamedColor> kPalette = {
      {"red", {220, 40, 40}},      {"green", {40, 200, 60}},    {"blue", {50, 90, 230}},
      {"yellow", {230, 210, 40}},  {"cyan", {40, 210, 210}},    {"magenta", {210, 50, 200}},
      {"orange", {240, 140, 30}},  {"white", {235, 235, 235}},
  };
  return kPalette;
}

inline const std::vector<Rgb>& background_palette() {
  static const std::vector<Rgb> kBackgrounds = {
      {12, 12, 12}, {100, 100, 120}, {20, 80, 40}, {120, 60, 20}, {30, 30, 130}, {110, 110, 50},
  };
  return kBackgrounds;
}

struct Keyframe {
  int frame = 0;
  int x = 0;
  int y = 0;

  friend bool operator==(const Keyframe&, const Keyframe&) = default;
};

struct Entity {
  int id = 0;
  std::string color_name;
  Rgb color;
  int width = 0;
  int height = 0;
  std::vector<Keyframe> trajectory;  // top-left corner, sorted by frame
  std::vector<std::string> tags;
  std::string action;

  friend bool operator==(const Entity&, const Entity&) = default;
};

struct ClipSpec {
  int frames = 30;
  double fps = 2.0;
  int width = 64;
  int height = 48;
  std::vector<int> cuts;          // first frame of each new scene
  std::vector<Rgb> backgrounds;   // one per scene

  friend bool operator==(const ClipSpec&, const ClipSpec&) = default;
};

struct Scenario {
  std::uint64_t seed = 0;
  ClipSpec clip;
  std::vector<Entity> entities;  // draw order, back to front
  int target_id = -1;            // -1: the query names no entity in the clip
  TemporalSpan gt_span;
  std::string query;

  const Entity* target() const {
    for (const auto& e : entities)
      if (e.id == target_id) return &e;
    return nullptr;
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct SimParams {
  int frames = 30;
  int width = 64;
  int height = 48;
  double fps = 2.0;
  int entities = 3;
  int max_cuts = 2;
  bool occlusion = true;  // false: each entity keeps to its own horizontal lane
  bool target_present = true;
  int min_span = 3;
};

struct FaultSpec {
  double sra_wrong_target_prob = 0.0;
  double sra_abstain_prob = 0.0;
  double tracker_jitter_sigma = 0.0;
  double tracker_dropout_prob = 0.0;
  double tra_flip_prob = 0.0;
  double format_error_prob = 0.0;

  void validate() const {
    for (double p : {sra_wrong_target_prob, sra_abstain_prob, tracker_dropout_prob, tra_flip_prob,
                     format_error_prob}) {
      if (!(p >= 0.0 && p <= 1.0)) throw ScenarioError("fault probabilities must be in [0, 1]");
    }
    if (!(tracker_jitter_sigma >= 0.0)) throw ScenarioError("jitter sigma must be >= 0");
  }
};

// splitmix64 finalizer chained over the inputs; stable across platforms.
inline std::uint64_t mix(std::initializer_list<std::uint64_t> values) {
  std::uint64_t h = 0x9E3779B97F4A7C15ull;
  for (auto v : values) {
    h ^= v + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    h += 0x9E3779B97F4A7C15ull;
    h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ull;
    h = (h ^ (h >> 27)) * 0x94D049BB133111EBull;
    h ^= h >> 31;
  }
  return h;
}

// FNV-1a, for folding identifiers into seeds.
inline std::uint64_t hash_text(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace detail {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  int uniform_int(int lo, int hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform01() < p; }
  double normal(double sigma) {
    // Box-Muller on our own uniforms keeps the stream platform-independent.
    const double u1 = std::max(uniform01(), 1e-300), u2 = uniform01();
    return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 gen_;
};

inline int floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return static_cast<int>(q);
}

inline int mean_abs_diff(Rgb a, Rgb b) {
  return (std::abs(a.r - b.r) + std::abs(a.g - b.g) + std::abs(a.b - b.b)) / 3;
}

}  // namespace detail

// Top-left corner of `e` on `frame`, linearly interpolated between keyframes
// and rounded half up with integer math.
inline std::pair<int, int> position_at(const Entity& e, int frame) {
  const auto& k = e.trajectory;
  if (frame <= k.front().frame) return {k.front().x, k.front().y};
  if (frame >= k.back().frame) return {k.back().x, k.back().y};
  for (std::size_t i = 1; i < k.size(); ++i) {
    if (frame <= k[i].frame) {
      const std::int64_t n = k[i].frame - k[i - 1].frame;
      const std::int64_t t = frame - k[i - 1].frame;
      const int x = k[i - 1].x + detail::floor_div(2 * (k[i].x - k[i - 1].x) * t + n, 2 * n);
      const int y = k[i - 1].y + detail::floor_div(2 * (k[i].y - k[i - 1].y) * t + n, 2 * n);
      return {x, y};
    }
  }
  return {k.back().x, k.back().y};
}

inline int scene_of(const ClipSpec& c, int frame) {
  int s = 0;
  for (int cut : c.cuts)
    if (frame >= cut) ++s;
  return s;
}

inline std::vector<TemporalSpan> scene_spans(const ClipSpec& c) {
  std::vector<TemporalSpan> out;
  int start = 0;
  for (int cut : c.cuts) {
    out.push_back({start, cut - 1});
    start = cut;
  }
  out.push_back({start, c.frames - 1});
  return out;
}

// Rendered scenario: the clip plus one ground-truth tube per entity over the
// whole clip (empty masks where fully occluded).
struct SimWorld {
  Scenario scenario;
  FrameClip clip;
  std::map<int, Tube> gt_tubes;

  const Tube* tube_of(int entity_id) const {
    auto it = gt_tubes.find(entity_id);
    return it == gt_tubes.end() ? nullptr : &it->second;
  }

  // Visible bounding box of an entity on a source frame.
  std::optional<Box> visible_box(int entity_id, int source_frame) const {
    const Tube* t = tube_of(entity_id);
    if (t == nullptr) return std::nullopt;
    const Mask* m = t->mask_at(source_frame);
    return m ? tight_box(*m) : std::nullopt;
  }
};

inline SimWorld rasterize(const Scenario& s) {
  const auto& c = s.clip;
  const int w = c.width, h = c.height;
  const auto n = static_cast<std::size_t>(w) * h;
  std::vector<Frame> frames;
  std::vector<std::vector<Mask>> masks(s.entities.size());
  std::vector<int> owner(n);
  for (int f = 0; f < c.frames; ++f) {
    std::fill(owner.begin(), owner.end(), -1);
    for (std::size_t e = 0; e < s.entities.size(); ++e) {
      const auto& ent = s.entities[e];
      const auto [x0, y0] = position_at(ent, f);
      for (int y = std::max(0, y0); y < std::min(h, y0 + ent.height); ++y)
        for (int x = std::max(0, x0); x < std::min(w, x0 + ent.width); ++x)
          owner[static_cast<std::size_t>(y) * w + x] = static_cast<int>(e);
    }
    const Rgb bg = c.backgrounds.at(static_cast<std::size_t>(scene_of(c, f)));
    Frame frame{f, f, std::vector<std::uint8_t>(n * 3)};
    for (std::size_t p = 0; p < n; ++p) {
      const Rgb px = owner[p] < 0 ? bg : s.entities[static_cast<std::size_t>(owner[p])].color;
      frame.pixels[3 * p] = px.r;
      frame.pixels[3 * p + 1] = px.g;
      frame.pixels[3 * p + 2] = px.b;
    }
    frames.push_back(std::move(frame));
    std::vector<std::uint8_t> bits(n);
    for (std::size_t e = 0; e < s.entities.size(); ++e) {
      for (std::size_t p = 0; p < n; ++p) bits[p] = owner[p] == static_cast<int>(e) ? 1 : 0;
      masks[e].push_back(Mask::from_bitmap(f, w, h, bits));
    }
  }
  SimWorld world{s, FrameClip(std::move(frames), c.fps, w, h), {}};
  for (std::size_t e = 0; e < s.entities.size(); ++e) {
    const int id = s.entities[e].id;
    world.gt_tubes.emplace(id, Tube("entity-" + std::to_string(id), 0, std::move(masks[e])));
  }
  return world;
}

namespace detail {

struct Motion {
  std::vector<Keyframe> keys;
  std::string action;
};

inline const char* direction_name(int d) {
  static const char* kNames[] = {"left", "right", "up", "down"};
  return kNames[d];
}

// Stationary, then moving in `dir` over [st, ed] at about 1 px/frame, then
// stationary. The x/y ranges bound the top-left corner.
inline Motion make_motion(Rng& rng, int frames, TemporalSpan window, int dir, int x_lo, int x_hi,
                          int y_lo, int y_hi) {
  const bool horizontal = dir < 2;
  const int room = horizontal ? x_hi - x_lo : y_hi - y_lo;
  const int dist = std::min(window.length() - 1, room);
  const int sign = (dir == 0 || dir == 2) ? -1 : 1;
  int x0 = rng.uniform_int(x_lo, x_hi), y0 = rng.uniform_int(y_lo, y_hi);
  if (horizontal) {
    x0 = sign < 0 ? rng.uniform_int(x_lo + dist, x_hi) : rng.uniform_int(x_lo, x_hi - dist);
  } else {
    y0 = sign < 0 ? rng.uniform_int(y_lo + dist, y_hi) : rng.uniform_int(y_lo, y_hi - dist);
  }
  const int x1 = horizontal ? x0 + sign * dist : x0;
  const int y1 = horizontal ? y0 : y0 + sign * dist;
  Motion m;
  m.keys.push_back({0, x0, y0});
  if (window.st > 0) m.keys.push_back({window.st, x0, y0});
  m.keys.push_back({window.ed, x1, y1});
  if (window.ed < frames - 1) m.keys.push_back({frames - 1, x1, y1});
  m.action = std::string("moves ") + direction_name(dir);
  if (window.ed < frames - 1) m.action += " and then stops";
  return m;
}

inline Motion make_still(Rng& rng, int frames, int x_lo, int x_hi, int y_lo, int y_hi) {
  const int x = rng.uniform_int(x_lo, x_hi), y = rng.uniform_int(y_lo, y_hi);
  return {{{0, x, y}, {frames - 1, x, y}}, "stays still"};
}

}  // namespace detail

inline void validate_scenario(const Scenario& s) {
  const auto& c = s.clip;
  if (c.frames < 4) throw ScenarioError("scenario needs at least 4 frames");
  if (c.width <= 0 || c.height <= 0 || !(c.fps > 0)) throw ScenarioError("bad clip spec");
  if (c.backgrounds.size() != c.cuts.size() + 1)
    throw ScenarioError("need one background per scene");
  for (std::size_t i = 0; i < c.cuts.size(); ++i) {
    if (c.cuts[i] <= 0 || c.cuts[i] >= c.frames || (i > 0 && c.cuts[i] <= c.cuts[i - 1]))
      throw ScenarioError("cuts must be increasing and inside the clip");
  }
  if (s.entities.empty()) throw ScenarioError("scenario needs at least one entity");
  if (!s.gt_span.valid_in(c.frames)) throw ScenarioError("gt_span outside clip");
  for (std::size_t i = 0; i < s.entities.size(); ++i) {
    const auto& e = s.entities[i];
    if (e.trajectory.empty()) throw ScenarioError("entity without trajectory");
    for (std::size_t j = 0; j < i; ++j)
      if (s.entities[j].color == e.color || s.entities[j].id == e.id)
        throw ScenarioError("entity colors and ids must be distinct");
    for (int f = 0; f < c.frames; ++f) {
      const auto [x, y] = position_at(e, f);
      if (x < 0 || y < 0 || x + e.width > c.width || y + e.height > c.height)
        throw ScenarioError("entity " + std::to_string(e.id) + " leaves the frame");
    }
  }
  if (s.target_id >= 0 && s.target() == nullptr) throw ScenarioError("target_id not an entity");
}

// Checks the property the annotations rely on: on every frame of the span
// the target is visible and mask cleanup recovers exactly its visible box,
// so a box annotation and a box derived from the mask agree.
inline bool target_visible_on_span(const SimWorld& w) {
  const Tube* t = w.tube_of(w.scenario.target_id);
  if (t == nullptr) return true;
  for (int f = w.scenario.gt_span.st; f <= w.scenario.gt_span.ed; ++f) {
    const Mask& m = *t->mask_at(f);
    const auto cleaned = mask_to_box(m);
    if (!cleaned || cleaned != tight_box(m)) return false;
  }
  return true;
}

inline Scenario generate(std::uint64_t seed, const SimParams& p = {}) {
  const int entity_count = p.entities;
  const auto& palette = entity_palette();
  if (entity_count < 1) throw ScenarioError("need at least one entity");
  if (p.frames < 4) throw ScenarioError("need at least 4 frames");
  if (entity_count + (p.target_present ? 0 : 1) > static_cast<int>(palette.size()))
    throw ScenarioError("not enough distinct colors for the requested entities");
  const int min_span = std::clamp(p.min_span, 1, p.frames);
  const int lane_h = p.occlusion ? p.height : p.height / entity_count;
  const int max_side = std::min({12, p.width / 2, lane_h});
  if (max_side < 4) throw ScenarioError("entities do not fit in the frame");

  detail::Rng rng(mix({seed, 0xC11Full}));
  Scenario s;
  s.seed = seed;
  s.clip.frames = p.frames;
  s.clip.fps = p.fps;
  s.clip.width = p.width;
  s.clip.height = p.height;

  // Cuts: each scene at least max(5, min_span) frames long.
  const int seg_min = std::max(5, min_span);
  int cuts = rng.uniform_int(0, std::max(0, p.max_cuts));
  while (cuts > 0 && (cuts + 1) * seg_min > p.frames) --cuts;
  for (int attempt = 0; attempt < 100 && static_cast<int>(s.clip.cuts.size()) != cuts; ++attempt) {
    std::vector<int> c;
    for (int i = 0; i < cuts; ++i) c.push_back(rng.uniform_int(seg_min, p.frames - seg_min));
    std::sort(c.begin(), c.end());
    bool ok = true;
    for (std::size_t i = 1; i < c.size(); ++i) ok = ok && c[i] - c[i - 1] >= seg_min;
    if (ok) s.clip.cuts = c;
  }
  const auto& bgs = background_palette();
  Rgb prev = bgs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(bgs.size()) - 1))];
  s.clip.backgrounds.push_back(prev);
  for (std::size_t i = 0; i < s.clip.cuts.size(); ++i) {
    std::vector<Rgb> options;
    for (const auto& b : bgs)
      if (detail::mean_abs_diff(b, prev) >= 60) options.push_back(b);
    prev = options[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(options.size()) - 1))];
    s.clip.backgrounds.push_back(prev);
  }

  // Ground-truth span inside one scene.
  const auto scenes = scene_spans(s.clip);
  std::vector<TemporalSpan> eligible;
  for (const auto& sc : scenes)
    if (sc.length() >= min_span) eligible.push_back(sc);
  const auto scene = eligible[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<int>(eligible.size()) - 1))];
  const int len = rng.uniform_int(min_span, scene.length());
  const int st = rng.uniform_int(scene.st, scene.ed - len + 1);
  s.gt_span = {st, st + len - 1};

  std::vector<std::size_t> colors(palette.size());
  for (std::size_t i = 0; i < colors.size(); ++i) colors[i] = i;
  for (std::size_t i = colors.size() - 1; i > 0; --i)
    std::swap(colors[i], colors[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);

  const int target_index = p.target_present ? rng.uniform_int(0, entity_count - 1) : -1;
  for (int attempt = 0; attempt < 200; ++attempt) {
    s.entities.clear();
    for (int i = 0; i < entity_count; ++i) {
      Entity e;
      e.id = i;
      const auto& col = palette[colors[static_cast<std::size_t>(i)]];
      e.color_name = col.name;
      e.color = col.rgb;
      e.width = rng.uniform_int(6, max_side);
      e.height = rng.uniform_int(std::min(6, max_side), max_side);
      const int x_lo = 0, x_hi = p.width - e.width;
      const int y_lo = p.occlusion ? 0 : i * lane_h;
      const int y_hi = p.occlusion ? p.height - e.height : y_lo + lane_h - e.height;
      // Lanes only allow horizontal motion.
      const int dir = rng.uniform_int(0, p.occlusion ? 3 : 1);
      detail::Motion m;
      if (i == target_index) {
        m = detail::make_motion(rng, p.frames, s.gt_span, dir, x_lo, x_hi, y_lo, y_hi);
      } else if (rng.bernoulli(0.5)) {
        const int wl = rng.uniform_int(2, p.frames);
        const int ws = rng.uniform_int(0, p.frames - wl);
        m = detail::make_motion(rng, p.frames, {ws, ws + wl - 1}, dir, x_lo, x_hi, y_lo, y_hi);
      } else {
        m = detail::make_still(rng, p.frames, x_lo, x_hi, y_lo, y_hi);
      }
      e.trajectory = std::move(m.keys);
      e.action = std::move(m.action);
      e.tags = {e.color_name, "block"};
      s.entities.push_back(std::move(e));
    }
    if (target_index >= 0) {
      s.target_id = target_index;
      const auto& t = s.entities[static_cast<std::size_t>(target_index)];
      s.query = "the " + t.color_name + " block " + t.action;
    } else {
      s.target_id = -1;
      const auto& absent = palette[colors[static_cast<std::size_t>(entity_count)]];
      s.query = "the " + absent.name + " block " + std::string("moves ") +
                detail::direction_name(rng.uniform_int(0, 3));
    }
    validate_scenario(s);
    if (target_visible_on_span(rasterize(s))) return s;
  }
  throw ScenarioError("could not place entities so the target stays visible");
}

// ---- JSON ----------------------------------------------------------------

inline nlohmann::json rgb_to_json(Rgb c) { return {c.r, c.g, c.b}; }
inline Rgb rgb_from_json(const nlohmann::json& j) {
  return {j.at(0).get<std::uint8_t>(), j.at(1).get<std::uint8_t>(), j.at(2).get<std::uint8_t>()};
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json ents = nlohmann::json::array();
  for (const auto& e : s.entities) {
    nlohmann::json traj = nlohmann::json::array();
    for (const auto& k : e.trajectory) traj.push_back({k.frame, k.x, k.y});
    ents.push_back({{"id", e.id},
                    {"color_name", e.color_name},
                    {"color", rgb_to_json(e.color)},
                    {"size", {e.width, e.height}},
                    {"trajectory", traj},
                    {"tags", e.tags},
                    {"action", e.action}});
  }
  nlohmann::json bgs = nlohmann::json::array();
  for (const auto& b : s.clip.backgrounds) bgs.push_back(rgb_to_json(b));
  return {{"seed", s.seed},
          {"clip_spec",
           {{"frames", s.clip.frames},
            {"fps", s.clip.fps},
            {"width", s.clip.width},
            {"height", s.clip.height},
            {"cuts", s.clip.cuts},
            {"backgrounds", bgs}}},
          {"entities", ents},
          {"target_id", s.target_id},
          {"gt_span", span_to_json(s.gt_span)},
          {"query", s.query}};
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario s;
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto& c = j.at("clip_spec");
    s.clip.frames = c.at("frames").get<int>();
    s.clip.fps = c.at("fps").get<double>();
    s.clip.width = c.at("width").get<int>();
    s.clip.height = c.at("height").get<int>();
    s.clip.cuts = c.at("cuts").get<std::vector<int>>();
    for (const auto& b : c.at("backgrounds")) s.clip.backgrounds.push_back(rgb_from_json(b));
    for (const auto& je : j.at("entities")) {
      Entity e;
      e.id = je.at("id").get<int>();
      e.color_name = je.at("color_name").get<std::string>();
      e.color = rgb_from_json(je.at("color"));
      e.width = je.at("size").at(0).get<int>();
      e.height = je.at("size").at(1).get<int>();
      for (const auto& k : je.at("trajectory"))
        e.trajectory.push_back({k.at(0).get<int>(), k.at(1).get<int>(), k.at(2).get<int>()});
      e.tags = je.value("tags", std::vector<std::string>{});
      e.action = je.value("action", std::string{});
      s.entities.push_back(std::move(e));
    }
    s.target_id = j.at("target_id").get<int>();
    s.gt_span = span_from_json(j.at("gt_span"));
    s.query = j.at("query").get<std::string>();
    validate_scenario(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("malformed scenario: ") + e.what());
  }
}

inline FaultSpec faults_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ScenarioError("fault spec must be a JSON object");
  static const std::set<std::string> kKeys = {"sra_wrong_target_prob", "sra_abstain_prob",
                                              "tracker_jitter_sigma",  "tracker_dropout_prob",
                                              "tra_flip_prob",         "format_error_prob"};
  for (const auto& [key, value] : j.items())
    if (!kKeys.count(key)) throw ScenarioError("unknown fault spec key: " + key);
  FaultSpec f;
  try {
    f.sra_wrong_target_prob = j.value("sra_wrong_target_prob", 0.0);
    f.sra_abstain_prob = j.value("sra_abstain_prob", 0.0);
    f.tracker_jitter_sigma = j.value("tracker_jitter_sigma", 0.0);
    f.tracker_dropout_prob = j.value("tracker_dropout_prob", 0.0);
    f.tra_flip_prob = j.value("tra_flip_prob", 0.0);
    f.format_error_prob = j.value("format_error_prob", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("malformed fault spec: ") + e.what());
  }
  f.validate();
  return f;
}

inline nlohmann::json faults_to_json(const FaultSpec& f) {
  return {{"sra_wrong_target_prob", f.sra_wrong_target_prob},
          {"sra_abstain_prob", f.sra_abstain_prob},
          {"tracker_jitter_sigma", f.tracker_jitter_sigma},
          {"tracker_dropout_prob", f.tracker_dropout_prob},
          {"tra_flip_prob", f.tra_flip_prob},
          {"format_error_prob", f.format_error_prob}};
}

// ---- Oracle backends -----------------------------------------------------

namespace detail {

inline std::uint64_t role_tag(AgentRole r) { return static_cast<std::uint64_t>(r) + 1; }

// Source span covered by a request's frames (assumed contiguous).
inline TemporalSpan source_range(const std::vector<Frame>& frames) {
  return {frames.front().source_index, frames.back().source_index};
}

// Ground-truth tube of `entity` re-indexed onto `clip`-local frames.
inline Tube local_gt_tube(const SimWorld& w, int entity, const std::vector<Frame>& frames) {
  const Tube* gt = w.tube_of(entity);
  std::vector<Mask> masks;
  for (const auto& f : frames) masks.push_back(gt->mask_at(f.source_index)->with_frame_index(f.index));
  return Tube(gt->id(), frames.front().index, std::move(masks));
}

}  // namespace detail

// Answers every agent role from the scenario script. Pure in (request, seed):
// fault draws are seeded from a hash of the request's identifying fields.
class OracleAgentBackend : public AgentBackend {
 public:
  OracleAgentBackend(std::shared_ptr<const SimWorld> world, FaultSpec faults, std::uint64_t seed)
      : world_(std::move(world)), faults_(faults), seed_(seed) {
    faults_.validate();
  }

  AgentResponse respond(const AgentRequest& req) override {
    const auto& w = *world_;
    const auto& sc = w.scenario;
    if (req.role == AgentRole::parse) {
      AgentResponse r;
      r.parsed = split_query(req.query.raw);
      return r;
    }
    if (req.frames.empty()) throw BackendError("oracle: request has no frames");
    const auto src = detail::source_range(req.frames);
    detail::Rng rng(mix({seed_, detail::role_tag(req.role), static_cast<std::uint64_t>(src.st),
                         static_cast<std::uint64_t>(src.ed), req.dialogue.size(),
                         req.candidate ? hash_text(req.candidate->id()) : 0u}));
    const bool format_error = rng.bernoulli(faults_.format_error_prob);
    AgentResponse r;
    switch (req.role) {
      case AgentRole::propose: {
        if (format_error) {
          r.box = Box{0, -5, -5, req.width + 5, req.height + 5};
          return r;
        }
        const bool abstain = rng.bernoulli(faults_.sra_abstain_prob);
        const bool wrong = rng.bernoulli(faults_.sra_wrong_target_prob);
        const int s = req.frames.front().source_index;
        std::vector<std::pair<int, Box>> others;
        std::optional<Box> target_box;
        for (const auto& e : sc.entities) {
          auto b = w.visible_box(e.id, s);
          if (!b) continue;
          if (e.id == sc.target_id) target_box = b;
          else others.emplace_back(e.id, *b);
        }
        if (abstain) return r;
        if (wrong && !others.empty()) {
          r.box = others[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(others.size()) - 1))].second;
        } else if (target_box) {
          r.box = target_box;
        }
        return r;
      }
      case AgentRole::scene_judge: {
        if (format_error) return r;
        const bool relevant = sc.target_id >= 0 && intersect(src, sc.gt_span).has_value();
        r.decision = relevant ? Decision::accept : Decision::reject;
        r.caption = relevant ? "the query's action happens in this scene" : "unrelated scene";
        return r;
      }
      case AgentRole::verify: {
        if (!req.candidate) throw BackendError("oracle verify needs the candidate tube");
        if (format_error) return r;
        bool match = false;
        if (sc.target_id >= 0)
          match = tube_iou(*req.candidate, detail::local_gt_tube(w, sc.target_id, req.frames)) >= 0.5;
        if (rng.bernoulli(faults_.tra_flip_prob)) match = !match;
        r.decision = match ? Decision::accept : Decision::reject;
        r.caption = describe(*req.candidate, req.frames) +
                    (match ? "" : "; it does not match the query");
        return r;
      }
      case AgentRole::localize_grounded:
      case AgentRole::localize_ungrounded: {
        if (format_error) return r;
        const int n = static_cast<int>(req.frames.size());
        const auto hit = sc.target_id >= 0 ? intersect(src, sc.gt_span) : std::nullopt;
        if (hit) r.span = std::pair{hit->st - src.st, hit->ed - src.st};
        else r.span = std::pair{0, n - 1};
        const Entity* t = sc.target();
        const std::string who = t ? "the " + t->color_name + " block" : "no matching block";
        r.caption = who + " " + (t ? t->action : std::string("is not visible")) + ", seen around #" +
                    std::to_string(r.span->first) + "-#" + std::to_string(r.span->second);
        return r;
      }
      case AgentRole::parse:
        break;
    }
    throw BackendError("oracle: unsupported role");
  }

 private:
  // Caption naming the entity that best matches the candidate.
  std::string describe(const Tube& candidate, const std::vector<Frame>& frames) const {
    const Entity* best = nullptr;
    double best_iou = 0.0;
    for (const auto& e : world_->scenario.entities) {
      const double iou = tube_iou(candidate, detail::local_gt_tube(*world_, e.id, frames));
      if (iou > best_iou) {
        best_iou = iou;
        best = &e;
      }
    }
    if (best == nullptr) return "the marked region shows no block";
    return "the marked " + best->color_name + " block " + best->action;
  }

  std::shared_ptr<const SimWorld> world_;
  FaultSpec faults_;
  std::uint64_t seed_;
};

// Returns the ground-truth tube of the entity whose visible box best overlaps
// the seed, degraded by jitter and dropout (never on the seed frame).
class OracleTrackerBackend : public TrackerBackend {
 public:
  OracleTrackerBackend(std::shared_ptr<const SimWorld> world, FaultSpec faults, std::uint64_t seed)
      : world_(std::move(world)), faults_(faults), seed_(seed) {
    faults_.validate();
  }

  std::optional<Tube> track(const FrameClip& clip, const Box& seed) override {
    const auto& w = *world_;
    const int s = clip[seed.frame_index].source_index;
    int best = -1;
    double best_iou = 0.0;
    for (const auto& e : w.scenario.entities) {
      const auto b = w.visible_box(e.id, s);
      if (!b) continue;
      const double iou = box_iou(seed, *b);
      if (iou > best_iou) {
        best_iou = iou;
        best = e.id;
      }
    }
    if (best < 0) return std::nullopt;
    Tube gt = detail::local_gt_tube(w, best, clip.frames());
    detail::Rng rng(mix({seed_, 0x7AC4ull, static_cast<std::uint64_t>(best),
                         static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(clip[0].source_index)}));
    std::vector<Mask> masks;
    for (const auto& m : gt.masks()) {
      if (m.frame_index() == seed.frame_index || m.is_empty()) {
        masks.push_back(m);
        continue;
      }
      if (rng.bernoulli(faults_.tracker_dropout_prob)) {
        masks.push_back(Mask::empty(m.frame_index(), m.width(), m.height()));
        continue;
      }
      if (faults_.tracker_jitter_sigma > 0.0) {
        const int dx = static_cast<int>(std::lround(rng.normal(faults_.tracker_jitter_sigma)));
        const int dy = static_cast<int>(std::lround(rng.normal(faults_.tracker_jitter_sigma)));
        masks.push_back(translate(m, dx, dy));
      } else {
        masks.push_back(m);
      }
    }
    return Tube("track-" + std::to_string(best) + "@" + std::to_string(s), gt.first(),
                std::move(masks));
  }

  static Mask translate(const Mask& m, int dx, int dy) {
    if (dx == 0 && dy == 0) return m;
    const int w = m.width(), h = m.height();
    const auto bits = m.to_bitmap();
    std::vector<std::uint8_t> out(bits.size(), 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!bits[static_cast<std::size_t>(y) * w + x]) continue;
        const int nx = x + dx, ny = y + dy;
        if (nx >= 0 && ny >= 0 && nx < w && ny < h) out[static_cast<std::size_t>(ny) * w + nx] = 1;
      }
    return Mask::from_bitmap(m.frame_index(), w, h, out);
  }

 private:
  std::shared_ptr<const SimWorld> world_;
  FaultSpec faults_;
  std::uint64_t seed_;
};

struct OracleBackends {
  std::unique_ptr<OracleAgentBackend> agent;
  std::unique_ptr<OracleTrackerBackend> tracker;
};

inline OracleBackends oracle_backends(std::shared_ptr<const SimWorld> world, const FaultSpec& faults,
                                      std::uint64_t seed) {
  return {std::make_unique<OracleAgentBackend>(world, faults, seed),
          std::make_unique<OracleTrackerBackend>(world, faults, seed)};
}

}  // namespace astg::sim
