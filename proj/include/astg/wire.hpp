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

// JSON codecs for the /v1/agent and /v1/track protocols, plus backends that
// record every exchange to a JSONL log and replay such a log in order.

#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "astg/agent_backend.hpp"
#include "astg/error.hpp"
#include "astg/geometry.hpp"
#include "astg/image_io.hpp"
#include "astg/memory.hpp"
#include "astg/tracker.hpp"

namespace astg {

using nlohmann::json;

namespace detail {

inline json frames_to_wire(const std::vector<Frame>& frames, int width, int height) {
  json out = json::array();
  for (const auto& f : frames)
    out.push_back({{"id", f.index},
                   {"png_base64", base64_encode(encode_png(f.pixels.data(), width, height))}});
  return out;
}

// Decodes wire frames; `width`/`height` receive the shared frame size.
inline std::vector<Frame> frames_from_wire(const json& arr, int& width, int& height) {
  if (!arr.is_array()) throw BackendError("frames must be an array");
  std::vector<Frame> out;
  for (const auto& jf : arr) {
    RgbImage img;
    try {
      img = decode_png(base64_decode(jf.at("png_base64").get<std::string>()));
    } catch (const GeometryError& e) {
      throw BackendError(e.what());
    }
    if (out.empty()) {
      width = img.width;
      height = img.height;
    } else if (img.width != width || img.height != height) {
      throw BackendError("frames differ in size");
    }
    const int id = jf.at("id").get<int>();
    out.push_back({id, id, std::move(img.pixels)});
  }
  return out;
}

// Every key of the response object must be present; null means absent.
inline const json& require(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw BackendError(std::string("response lacks '") + key + "'");
  return *it;
}

}  // namespace detail

// ---- /v1/agent -------------------------------------------------------------

inline json encode_agent_request(const AgentRequest& req) {
  json dialogue = json::array();
  for (const auto& m : req.dialogue) dialogue.push_back(message_to_json(m));
  return {{"role", to_string(req.role)},
          {"frames", detail::frames_to_wire(req.frames, req.width, req.height)},
          {"query", {{"raw", req.query.raw}, {"np", req.query.np}, {"context", req.query.context}}},
          {"dialogue", dialogue},
          {"options", req.options}};
}

inline AgentRequest decode_agent_request(const json& j) {
  AgentRequest req;
  try {
    req.role = agent_role_from_string(j.at("role").get<std::string>());
    req.frames = detail::frames_from_wire(j.at("frames"), req.width, req.height);
    const auto& q = j.at("query");
    req.query = {q.at("raw").get<std::string>(), q.at("np").get<std::string>(),
                 q.at("context").get<std::string>()};
    for (const auto& m : j.at("dialogue")) req.dialogue.push_back(message_from_json(m));
    req.options = j.value("options", json::object());
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed agent request: ") + e.what());
  } catch (const QueryError& e) {
    throw BackendError(std::string("malformed agent request: ") + e.what());
  }
  if (is_visual_role(req.role) && req.frames.empty())
    throw BackendError("visual roles need at least one frame");
  return req;
}

// The parse role returns {"np", "context"} serialized into `caption`.
inline json encode_agent_response(const AgentResponse& r) {
  json caption = nullptr;
  if (r.parsed)
    caption = json{{"np", r.parsed->np}, {"context", r.parsed->context}}.dump();
  else if (r.caption)
    caption = *r.caption;
  return {{"status", "ok"},
          {"box", r.box ? box_to_json(*r.box) : json(nullptr)},
          {"decision", r.decision ? json(to_string(*r.decision)) : json(nullptr)},
          {"span", r.span ? json{r.span->first, r.span->second} : json(nullptr)},
          {"caption", caption},
          {"error", nullptr}};
}

inline json encode_agent_error(const std::string& message) {
  return {{"status", "error"}, {"box", nullptr},     {"decision", nullptr},
          {"span", nullptr},   {"caption", nullptr}, {"error", message}};
}

// Throws BackendError for "error" responses and for payloads that break the
// wire shape. Role-level schema checks are left to the agent wrappers.
inline AgentResponse decode_agent_response(const json& j, const AgentRequest& req) {
  if (!j.is_object()) throw BackendError("agent response must be an object");
  AgentResponse r;
  try {
    const auto status = detail::require(j, "status").get<std::string>();
    if (status == "error") {
      const auto& err = detail::require(j, "error");
      throw BackendError("agent error: " + (err.is_string() ? err.get<std::string>() : "unspecified"));
    }
    if (status != "ok") throw BackendError("unknown agent status '" + status + "'");
    const int frame = req.frames.empty() ? 0 : req.frames.front().index;
    if (const auto& b = detail::require(j, "box"); !b.is_null()) r.box = box_from_json(b, frame);
    if (const auto& d = detail::require(j, "decision"); !d.is_null()) {
      const auto text = d.get<std::string>();
      if (text == "accept")
        r.decision = Decision::accept;
      else if (text == "reject")
        r.decision = Decision::reject;
      else
        throw BackendError("unknown decision '" + text + "'");
    }
    if (const auto& s = detail::require(j, "span"); !s.is_null()) {
      const auto span = span_from_json(s);
      r.span = std::pair{span.st, span.ed};
    }
    if (const auto& c = detail::require(j, "caption"); !c.is_null()) r.caption = c.get<std::string>();
    detail::require(j, "error");
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed agent response: ") + e.what());
  } catch (const GeometryError& e) {
    throw BackendError(std::string("malformed agent response: ") + e.what());
  }
  if (req.role == AgentRole::parse && r.caption) {
    const auto inner = json::parse(*r.caption, nullptr, false);
    if (inner.is_object() && inner.contains("np") && inner["np"].is_string()) {
      r.parsed = ParsedQuery{req.query.raw, inner["np"].get<std::string>(),
                             inner.value("context", std::string{})};
    }
  }
  return r;
}

// ---- /v1/track -------------------------------------------------------------

inline json encode_track_request(const FrameClip& clip, const Box& seed) {
  return {{"frames", detail::frames_to_wire(clip.frames(), clip.width(), clip.height())},
          {"seed", {{"frame", seed.frame_index}, {"box", box_to_json(seed)}}}};
}

struct TrackRequest {
  FrameClip clip;
  Box seed;
};

inline TrackRequest decode_track_request(const json& j) {
  try {
    int w = 0, h = 0;
    auto frames = detail::frames_from_wire(j.at("frames"), w, h);
    if (frames.empty()) throw BackendError("track request needs frames");
    const auto& s = j.at("seed");
    const int f = s.at("frame").get<int>();
    return {FrameClip(std::move(frames), 1.0, w, h), box_from_json(s.at("box"), f)};
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed track request: ") + e.what());
  } catch (const GeometryError& e) {
    throw BackendError(std::string("malformed track request: ") + e.what());
  }
}

// Empty masks travel as null.
inline json encode_track_response(const std::optional<Tube>& tube) {
  if (!tube) return {{"status", "fail"}, {"tube", nullptr}};
  json masks = json::object();
  for (const auto& m : tube->masks())
    masks[std::to_string(m.frame_index())] = m.is_empty() ? json(nullptr) : mask_to_json(m);
  return {{"status", "ok"}, {"tube", {{"first", tube->first()}, {"masks", masks}}}};
}

// Null or missing frames between `first` and the highest key become empty
// masks of the clip's size.
inline std::optional<Tube> decode_track_response(const json& j, const FrameClip& clip,
                                                 const Box& seed) {
  try {
    const auto status = j.at("status").get<std::string>();
    if (status == "fail") return std::nullopt;
    if (status != "ok") throw BackendError("unknown track status '" + status + "'");
    const auto& t = j.at("tube");
    const int first = t.at("first").get<int>();
    std::map<int, Mask> by_frame;
    int last = first;
    for (const auto& [key, value] : t.at("masks").items()) {
      std::size_t used = 0;
      const int f = std::stoi(key, &used);
      if (used != key.size() || f < first) throw BackendError("bad mask key '" + key + "'");
      last = std::max(last, f);
      if (!value.is_null()) by_frame.emplace(f, mask_from_json(value, f));
    }
    std::vector<Mask> masks;
    for (int f = first; f <= last; ++f) {
      auto it = by_frame.find(f);
      masks.push_back(it != by_frame.end() ? it->second : Mask::empty(f, clip.width(), clip.height()));
    }
    return Tube("remote-track@" + std::to_string(seed.frame_index) + ":" +
                    std::to_string(seed.x1) + "," + std::to_string(seed.y1),
                first, std::move(masks));
  } catch (const json::exception& e) {
    throw BackendError(std::string("malformed track response: ") + e.what());
  } catch (const GeometryError& e) {
    throw BackendError(std::string("malformed track response: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw BackendError("malformed track response: non-integer mask key");
  }
}

// ---- Record / replay -------------------------------------------------------

// Pixel-free summary of a request, stored next to each recorded response.
inline json request_summary(const AgentRequest& req) {
  json ids = json::array();
  for (const auto& f : req.frames) ids.push_back(f.index);
  json wire = encode_agent_request(AgentRequest{req.role, req.width, req.height, {}, req.query,
                                                req.dialogue, req.options, std::nullopt});
  wire["frames"] = ids;
  return wire;
}

// Appends one JSON line per exchange. Shared by the recording backends so a
// single log keeps the global call order.
class ExchangeLog {
 public:
  explicit ExchangeLog(std::ostream& out) : out_(out) {}

  void append(const json& line) {
    std::lock_guard lock(mu_);
    out_ << line.dump() << '\n';
    out_.flush();
  }

 private:
  std::ostream& out_;
  std::mutex mu_;
};

class RecordingAgentBackend : public AgentBackend {
 public:
  RecordingAgentBackend(AgentBackend& inner, ExchangeLog& log) : inner_(inner), log_(log) {}

  AgentResponse respond(const AgentRequest& request) override {
    json line = {{"endpoint", "agent"}, {"request", request_summary(request)}};
    try {
      auto resp = inner_.respond(request);
      line["response"] = encode_agent_response(resp);
      log_.append(line);
      return resp;
    } catch (const BackendError& e) {
      line["response"] = encode_agent_error(e.what());
      log_.append(line);
      throw;
    }
  }

 private:
  AgentBackend& inner_;
  ExchangeLog& log_;
};

class RecordingTrackerBackend : public TrackerBackend {
 public:
  RecordingTrackerBackend(TrackerBackend& inner, ExchangeLog& log) : inner_(inner), log_(log) {}

  std::optional<Tube> track(const FrameClip& clip, const Box& seed) override {
    json line = {{"endpoint", "track"},
                 {"request", {{"frames", clip.size()},
                              {"seed", {{"frame", seed.frame_index}, {"box", box_to_json(seed)}}}}}};
    try {
      auto tube = inner_.track(clip, seed);
      line["response"] = encode_track_response(tube);
      log_.append(line);
      return tube;
    } catch (const BackendError& e) {
      line["response"] = {{"status", "error"}, {"error", e.what()}};
      log_.append(line);
      throw;
    }
  }

 private:
  TrackerBackend& inner_;
  ExchangeLog& log_;
};

// Serves recorded responses strictly in log order. Meant for one episode at
// a time; a request whose endpoint or role differs from the next log line is
// a divergence and fails with BackendError.
class ReplayLog {
 public:
  explicit ReplayLog(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      lines_.push_back(json::parse(line));
    }
  }

  json next(const std::string& endpoint, const std::string& role) {
    std::lock_guard lock(mu_);
    if (cursor_ >= lines_.size()) throw BackendError("replay log exhausted");
    const json& line = lines_[cursor_];
    if (line.at("endpoint") != endpoint)
      throw BackendError("replay divergence at line " + std::to_string(cursor_ + 1) +
                         ": expected " + line.at("endpoint").get<std::string>() + " call");
    if (!role.empty() && line.at("request").at("role") != role)
      throw BackendError("replay divergence at line " + std::to_string(cursor_ + 1) +
                         ": expected role " + line.at("request").at("role").get<std::string>());
    ++cursor_;
    return line.at("response");
  }

  std::size_t remaining() const {
    std::lock_guard lock(mu_);
    return lines_.size() - cursor_;
  }

 private:
  std::vector<json> lines_;
  std::size_t cursor_ = 0;
  mutable std::mutex mu_;
};

class ReplayAgentBackend : public AgentBackend {
 public:
  explicit ReplayAgentBackend(ReplayLog& log) : log_(log) {}

  AgentResponse respond(const AgentRequest& request) override {
    return decode_agent_response(log_.next("agent", std::string(to_string(request.role))), request);
  }

 private:
  ReplayLog& log_;
};

class ReplayTrackerBackend : public TrackerBackend {
 public:
  explicit ReplayTrackerBackend(ReplayLog& log) : log_(log) {}

  std::optional<Tube> track(const FrameClip& clip, const Box& seed) override {
    const json resp = log_.next("track", "");
    if (resp.value("status", "") == "error")
      throw BackendError("tracker error: " + resp.value("error", std::string("unspecified")));
    return decode_track_response(resp, clip, seed);
  }

 private:
  ReplayLog& log_;
};

}  // namespace astg
