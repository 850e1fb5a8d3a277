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

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <functional>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "support.hpp"

namespace astg {
namespace {

using testing::solid_clip;

// In-process stand-in for the reference server. Handlers see the decoded
// request and return the raw reply (status, body).
class StubServer {
 public:
  using AgentHandler = std::function<std::pair<int, json>(const AgentRequest&)>;
  using TrackHandler = std::function<std::pair<int, json>(const TrackRequest&)>;

  StubServer() {
    server_.Post("/v1/agent", [this](const httplib::Request& rq, httplib::Response& rs) {
      ++agent_calls;
      auto req = decode_agent_request(json::parse(rq.body));
      {
        std::lock_guard lock(mu_);
        last_agent_ = req;
      }
      auto [status, body] = agent(req);
      rs.status = status;
      rs.set_content(body.dump(), "application/json");
    });
    server_.Post("/v1/track", [this](const httplib::Request& rq, httplib::Response& rs) {
      ++track_calls;
      auto [status, body] = track(decode_track_request(json::parse(rq.body)));
      rs.status = status;
      rs.set_content(body.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  Endpoint endpoint() const { return parse_endpoint(url()); }

  AgentRequest last_agent() {
    std::lock_guard lock(mu_);
    return last_agent_;
  }

  AgentHandler agent = [](const AgentRequest&) { return std::pair{200, json::object()}; };
  TrackHandler track = [](const TrackRequest&) { return std::pair{200, json::object()}; };
  std::atomic<int> agent_calls{0};
  std::atomic<int> track_calls{0};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mu_;
  AgentRequest last_agent_;
};

// Nothing listens on port 1 of the loopback interface in the sandbox.
const std::string kDeadUrl = "http://127.0.0.1:1";

AgentRequest propose_request(int w, int h) {
  AgentRequest req;
  req.role = AgentRole::propose;
  req.width = w;
  req.height = h;
  auto clip = solid_clip(2, w, h, {200, 10, 10});
  req.frames = clip.frames();
  req.query = {"the red block moves left", "the red block", "moves left"};
  return req;
}

TEST(RemoteAgent, RoundTripWithoutScaling) {
  StubServer stub;
  stub.agent = [](const AgentRequest& r) {
    AgentResponse resp;
    resp.box = Box{r.frames.front().index, 3, 4, 20, 30};
    return std::pair{200, encode_agent_response(resp)};
  };
  RemoteAgentBackend agent(stub.endpoint(), 5000);
  auto req = propose_request(64, 48);
  req.options = {{"resolution", 448}};
  const auto resp = agent.respond(req);
  ASSERT_TRUE(resp.box.has_value());
  EXPECT_EQ(*resp.box, (Box{0, 3, 4, 20, 30}));
  const auto seen = stub.last_agent();
  EXPECT_EQ(seen.width, 64);
  EXPECT_EQ(seen.height, 48);
  EXPECT_EQ(seen.query, req.query);
  EXPECT_EQ(seen.frames[0].pixels, req.frames[0].pixels);
  EXPECT_EQ(stub.agent_calls.load(), 1);
}

TEST(RemoteAgent, DownscalesAndMapsBoxBack) {
  StubServer stub;
  stub.agent = [](const AgentRequest& r) {
    AgentResponse resp;
    resp.box = Box{r.frames.front().index, 10, 20, 31, 41};
    return std::pair{200, encode_agent_response(resp)};
  };
  RemoteAgentBackend agent(stub.endpoint(), 5000);
  auto req = propose_request(896, 672);
  req.options = {{"resolution", 448}};
  const auto resp = agent.respond(req);
  const auto seen = stub.last_agent();
  EXPECT_EQ(seen.width, 448);
  EXPECT_EQ(seen.height, 336);
  ASSERT_EQ(seen.frames.size(), 2u);
  EXPECT_EQ(seen.frames[0].pixels.size(), 448u * 336u * 3u);
  EXPECT_EQ((std::vector<int>{seen.frames[0].pixels[0], seen.frames[0].pixels[1], seen.frames[0].pixels[2]}),
            (std::vector<int>{200, 10, 10}));
  ASSERT_TRUE(resp.box.has_value());
  // Half scale: corners double, the far corner rounds outward.
  EXPECT_EQ(*resp.box, (Box{0, 20, 40, 62, 82}));
}

TEST(RemoteAgent, MappedBoxIsClampedToTheFrame) {
  StubServer stub;
  stub.agent = [](const AgentRequest& r) {
    AgentResponse resp;
    resp.box = Box{r.frames.front().index, 0, 0, r.width, r.height};
    return std::pair{200, encode_agent_response(resp)};
  };
  RemoteAgentBackend agent(stub.endpoint(), 5000);
  auto req = propose_request(1001, 500);
  req.options = {{"resolution", 448}};
  const auto resp = agent.respond(req);
  ASSERT_TRUE(resp.box.has_value());
  EXPECT_TRUE(resp.box->valid_in(1001, 500));
  EXPECT_EQ(resp.box->x2, 1001);
  EXPECT_EQ(resp.box->y2, 500);
}

TEST(RemoteAgent, ErrorRepliesRaiseBackendError) {
  StubServer stub;
  stub.agent = [](const AgentRequest&) { return std::pair{500, encode_agent_error("model crashed")}; };
  RemoteAgentBackend agent(stub.endpoint(), 5000);
  try {
    agent.respond(propose_request(64, 48));
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("HTTP 500"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("model crashed"), std::string::npos);
  }

  stub.agent = [](const AgentRequest&) { return std::pair{200, json{{"box", nullptr}}}; };
  EXPECT_THROW(agent.respond(propose_request(64, 48)), BackendError);
}

TEST(RemoteAgent, UnreachableAndSlowServicesRaise) {
  RemoteAgentBackend dead(parse_endpoint(kDeadUrl), 500);
  EXPECT_THROW(dead.respond(propose_request(8, 8)), BackendError);

  StubServer stub;
  stub.agent = [](const AgentRequest&) {
    std::this_thread::sleep_for(std::chrono::milliseconds(600));
    AgentResponse resp;
    return std::pair{200, encode_agent_response(resp)};
  };
  RemoteAgentBackend slow(stub.endpoint(), 100);
  EXPECT_THROW(slow.respond(propose_request(8, 8)), BackendError);
}

TEST(RemoteTracker, RoundTripAndFail) {
  StubServer stub;
  Box seen_seed{};
  stub.track = [&seen_seed](const TrackRequest& r) {
    seen_seed = r.seed;
    std::vector<Mask> masks;
    for (int f = 0; f < r.clip.size(); ++f) {
      Box b = r.seed;
      b.frame_index = f;
      masks.push_back(f == 1 ? Mask::empty(f, r.clip.width(), r.clip.height())
                             : Mask::from_box(r.clip.width(), r.clip.height(), b));
    }
    return std::pair{200, encode_track_response(Tube("server-side", 0, std::move(masks)))};
  };
  RemoteTrackerBackend tracker(stub.endpoint(), 5000);
  const auto clip = solid_clip(3, 32, 24, {1, 2, 3});
  const Box seed{2, 4, 5, 12, 15};
  const auto tube = tracker.track(clip, seed);
  EXPECT_EQ(seen_seed, seed);
  ASSERT_TRUE(tube.has_value());
  EXPECT_EQ(tube->id(), "remote-track@2:4,5");
  EXPECT_EQ(tube->first(), 0);
  EXPECT_EQ(tube->last(), 2);
  EXPECT_TRUE(tube->mask_at(1)->is_empty());
  EXPECT_EQ(mask_to_box(*tube->mask_at(2)), (Box{2, 4, 5, 12, 15}));

  stub.track = [](const TrackRequest&) { return std::pair{200, encode_track_response(std::nullopt)}; };
  EXPECT_FALSE(tracker.track(clip, seed).has_value());

  stub.track = [](const TrackRequest&) { return std::pair{503, json{{"error", "busy"}}}; };
  EXPECT_THROW(tracker.track(clip, seed), BackendError);
  EXPECT_EQ(stub.track_calls.load(), 3);
}

TEST(RemoteTracker, UnreachableRaises) {
  RemoteTrackerBackend dead(parse_endpoint(kDeadUrl), 500);
  EXPECT_THROW(dead.track(solid_clip(1, 8, 8, {0, 0, 0}), Box{0, 1, 1, 4, 4}), BackendError);
}

TEST(ServiceCheck, HealthyStubs) {
  StubServer stub;
  stub.agent = [](const AgentRequest& r) {
    AgentResponse resp;
    resp.parsed = split_query(r.query.raw);
    return std::pair{200, encode_agent_response(resp)};
  };
  stub.track = [](const TrackRequest&) { return std::pair{200, encode_track_response(std::nullopt)}; };
  EngineConfig cfg;
  cfg.agent_endpoint = stub.url();
  cfg.tracker_endpoint = stub.url();
  const auto checks = check_services(cfg);
  ASSERT_EQ(checks.size(), 2u);
  EXPECT_EQ(checks[0].name, "agent");
  EXPECT_TRUE(checks[0].ok) << checks[0].detail;
  EXPECT_EQ(checks[0].detail, "parse ok");
  EXPECT_EQ(checks[1].name, "tracker");
  EXPECT_TRUE(checks[1].ok) << checks[1].detail;
  EXPECT_EQ(checks[1].detail, "track answered fail");
}

TEST(ServiceCheck, UnhealthyServices) {
  StubServer stub;
  // Protocol-valid JSON that violates the parse schema.
  stub.agent = [](const AgentRequest&) {
    AgentResponse resp;
    resp.parsed = ParsedQuery{"q", "", ""};
    return std::pair{200, encode_agent_response(resp)};
  };
  EngineConfig cfg;
  cfg.agent_endpoint = stub.url();
  cfg.tracker_endpoint = kDeadUrl;
  cfg.tracker_timeout_ms = 500;
  const auto checks = check_services(cfg);
  EXPECT_FALSE(checks[0].ok);
  EXPECT_FALSE(checks[1].ok);
  EXPECT_FALSE(checks[1].detail.empty());
}

}  // namespace
}  // namespace astg
