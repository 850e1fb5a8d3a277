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

// HTTP clients for remote agent (/v1/agent) and tracker (/v1/track)
// services. Transport failures and non-200 replies surface as BackendError.

#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "astg/agent_backend.hpp"
#include "astg/config.hpp"
#include "astg/image_io.hpp"
#include "astg/tracker.hpp"
#include "astg/wire.hpp"

namespace astg {

namespace detail {

inline nlohmann::json post_json(const Endpoint& ep, const std::string& path,
                                const nlohmann::json& body, int timeout_ms) {
  httplib::Client client(ep.host, ep.port);
  const auto timeout = std::chrono::milliseconds(timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res)
    throw BackendError("POST " + ep.base_url() + path + " failed: " + httplib::to_string(res.error()));
  nlohmann::json parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (res->status != 200) {
    std::string detail = parsed.is_object() && parsed.value("error", nlohmann::json()).is_string()
                             ? parsed["error"].get<std::string>()
                             : res->body.substr(0, 200);
    throw BackendError("POST " + ep.base_url() + path + " returned HTTP " +
                       std::to_string(res->status) + ": " + detail);
  }
  if (parsed.is_discarded()) throw BackendError("POST " + ep.base_url() + path + ": body is not JSON");
  return parsed;
}

// Shrinks every frame of `req` so its longer side fits `max_side`. Returns
// the scale factor applied (1.0 when untouched).
inline double downscale_request(AgentRequest& req, int max_side) {
  const auto [w, h] = fit_within(req.width, req.height, max_side);
  if (w == req.width && h == req.height) return 1.0;
  for (auto& f : req.frames)
    f.pixels = resize_nearest(RgbImage{req.width, req.height, std::move(f.pixels)}, w, h).pixels;
  const double scale = static_cast<double>(w) / req.width;
  req.width = w;
  req.height = h;
  return scale;
}

}  // namespace detail

class RemoteAgentBackend : public AgentBackend {
 public:
  RemoteAgentBackend(Endpoint endpoint, int timeout_ms)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

  // Frames larger than options.resolution are shrunk before sending; a
  // returned box is mapped back to the caller's pixel grid.
  AgentResponse respond(const AgentRequest& request) override {
    AgentRequest wire_req = request;
    double scale = 1.0;
    if (auto it = request.options.find("resolution"); it != request.options.end() && it->is_number_integer())
      scale = detail::downscale_request(wire_req, it->get<int>());
    auto resp = decode_agent_response(
        detail::post_json(endpoint_, "/v1/agent", encode_agent_request(wire_req), timeout_ms_),
        wire_req);
    if (resp.box && scale != 1.0) {
      auto& b = *resp.box;
      b.x1 = static_cast<int>(std::floor(b.x1 / scale));
      b.y1 = static_cast<int>(std::floor(b.y1 / scale));
      b.x2 = std::min(request.width, static_cast<int>(std::ceil(b.x2 / scale)));
      b.y2 = std::min(request.height, static_cast<int>(std::ceil(b.y2 / scale)));
    }
    return resp;
  }

 private:
  Endpoint endpoint_;
  int timeout_ms_;
};

class RemoteTrackerBackend : public TrackerBackend {
 public:
  RemoteTrackerBackend(Endpoint endpoint, int timeout_ms)
      : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {}

  std::optional<Tube> track(const FrameClip& clip, const Box& seed) override {
    return decode_track_response(
        detail::post_json(endpoint_, "/v1/track", encode_track_request(clip, seed), timeout_ms_),
        clip, seed);
  }

 private:
  Endpoint endpoint_;
  int timeout_ms_;
};

struct ServiceCheck {
  std::string name;
  std::string url;
  bool ok = false;
  std::string detail;
};

// Probes both services with minimal well-formed requests: a parse call for
// the agent and a one-frame track call for the tracker. Any protocol-valid
// answer (including tracker "fail") counts as healthy.
inline std::vector<ServiceCheck> check_services(const EngineConfig& cfg) {
  std::vector<ServiceCheck> out;
  {
    ServiceCheck c{"agent", cfg.agent_endpoint, false, {}};
    try {
      RemoteAgentBackend agent(parse_endpoint(cfg.agent_endpoint), cfg.agent_timeout_ms);
      AgentRequest req;
      req.role = AgentRole::parse;
      req.query = {"the red block moves left", "", ""};
      const auto resp = agent.respond(req);
      const auto problem = response_schema_error(req, resp);
      c.ok = !problem;
      c.detail = problem ? *problem : "parse ok";
    } catch (const Error& e) {
      c.detail = e.what();
    }
    out.push_back(std::move(c));
  }
  {
    ServiceCheck c{"tracker", cfg.tracker_endpoint, false, {}};
    try {
      RemoteTrackerBackend tracker(parse_endpoint(cfg.tracker_endpoint), cfg.tracker_timeout_ms);
      const int w = 16, h = 16;
      FrameClip clip({Frame{0, 0, std::vector<std::uint8_t>(w * h * 3, 0)}}, 1.0, w, h);
      const auto tube = tracker.track(clip, Box{0, 4, 4, 12, 12});
      c.ok = true;
      c.detail = tube ? "track ok" : "track answered fail";
    } catch (const Error& e) {
      c.detail = e.what();
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace astg
