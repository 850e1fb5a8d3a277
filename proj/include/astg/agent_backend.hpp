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

// The agent-backend contract: request/response shapes for every agent role
// and the interface that scripted, remote and replay backends implement.

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "astg/error.hpp"
#include "astg/geometry.hpp"

namespace astg {

struct ParsedQuery {
  std::string raw;
  std::string np;       // subject noun phrase
  std::string context;  // dynamic / relational description, may be empty

  friend bool operator==(const ParsedQuery&, const ParsedQuery&) = default;
};

enum class MessageSource { sra, tra, controller };
enum class MessageKind { caption, correction, status };

struct Message {
  MessageSource source = MessageSource::controller;
  MessageKind kind = MessageKind::status;
  std::string text;

  friend bool operator==(const Message&, const Message&) = default;
};

inline std::string_view to_string(MessageSource s) {
  switch (s) {
    case MessageSource::sra: return "SRA";
    case MessageSource::tra: return "TRA";
    case MessageSource::controller: return "Controller";
  }
  return "Controller";
}

inline std::string_view to_string(MessageKind k) {
  switch (k) {
    case MessageKind::caption: return "caption";
    case MessageKind::correction: return "correction";
    case MessageKind::status: return "status";
  }
  return "status";
}

inline MessageSource message_source_from_string(std::string_view s) {
  if (s == "SRA") return MessageSource::sra;
  if (s == "TRA") return MessageSource::tra;
  if (s == "Controller") return MessageSource::controller;
  throw BackendError("unknown message source: " + std::string(s));
}

inline MessageKind message_kind_from_string(std::string_view s) {
  if (s == "caption") return MessageKind::caption;
  if (s == "correction") return MessageKind::correction;
  if (s == "status") return MessageKind::status;
  throw BackendError("unknown message kind: " + std::string(s));
}

enum class AgentRole { parse, propose, scene_judge, verify, localize_grounded, localize_ungrounded };

inline std::string_view to_string(AgentRole r) {
  switch (r) {
    case AgentRole::parse: return "parse";
    case AgentRole::propose: return "propose";
    case AgentRole::scene_judge: return "scene_judge";
    case AgentRole::verify: return "verify";
    case AgentRole::localize_grounded: return "localize_grounded";
    case AgentRole::localize_ungrounded: return "localize_ungrounded";
  }
  return "parse";
}

inline AgentRole agent_role_from_string(std::string_view s) {
  for (auto r : {AgentRole::parse, AgentRole::propose, AgentRole::scene_judge, AgentRole::verify,
                 AgentRole::localize_grounded, AgentRole::localize_ungrounded}) {
    if (to_string(r) == s) return r;
  }
  throw BackendError("unknown agent role: " + std::string(s));
}

inline bool is_visual_role(AgentRole r) { return r != AgentRole::parse; }

enum class Decision { accept, reject };

inline std::string_view to_string(Decision d) { return d == Decision::accept ? "accept" : "reject"; }

struct AgentRequest {
  AgentRole role = AgentRole::parse;
  int width = 0;
  int height = 0;
  std::vector<Frame> frames;
  ParsedQuery query;
  std::vector<Message> dialogue;
  nlohmann::json options = nlohmann::json::object();
  // In-process only, never serialized: the candidate behind a verify
  // request, so simulation oracles can judge it without reading pixels.
  std::optional<Tube> candidate;
};

// One optional field per variant; which ones must be set depends on the
// role (see response_schema_error).
struct AgentResponse {
  std::optional<Box> box;
  std::optional<Decision> decision;
  std::optional<std::pair<int, int>> span;
  std::optional<std::string> caption;
  std::optional<ParsedQuery> parsed;
};

// Returns a description of what is wrong with `resp` for `req`, or nullopt
// when the response satisfies the role's variant schema.
inline std::optional<std::string> response_schema_error(const AgentRequest& req,
                                                        const AgentResponse& resp) {
  switch (req.role) {
    case AgentRole::parse:
      if (!resp.parsed || resp.parsed->np.empty()) return "parse response needs a non-empty np";
      return std::nullopt;
    case AgentRole::propose:
      if (resp.box && !resp.box->valid_in(req.width, req.height)) {
        const auto& b = *resp.box;
        return "box [" + std::to_string(b.x1) + "," + std::to_string(b.y1) + "," +
               std::to_string(b.x2) + "," + std::to_string(b.y2) + "] is outside the " +
               std::to_string(req.width) + "x" + std::to_string(req.height) + " frame";
      }
      return std::nullopt;
    case AgentRole::scene_judge:
    case AgentRole::verify:
      if (!resp.decision) return "missing decision";
      return std::nullopt;
    case AgentRole::localize_grounded:
    case AgentRole::localize_ungrounded:
      if (!resp.span) return "missing span";
      return std::nullopt;
  }
  return "unknown role";
}

// Implementations must be safe to call from several episodes at once.
// Transport and protocol failures are reported by throwing BackendError.
class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual AgentResponse respond(const AgentRequest& request) = 0;
};

class ScriptedAgentBackend : public AgentBackend {
 public:
  using Script = std::function<AgentResponse(const AgentRequest&)>;

  explicit ScriptedAgentBackend(Script script) : script_(std::move(script)) {}

  AgentResponse respond(const AgentRequest& request) override { return script_(request); }

 private:
  Script script_;
};

// Counts calls per role; forwards everything to the wrapped backend.
class CountingAgentBackend : public AgentBackend {
 public:
  explicit CountingAgentBackend(AgentBackend& inner) : inner_(inner) {}

  AgentResponse respond(const AgentRequest& request) override {
    {
      std::lock_guard lock(mu_);
      ++counts_[std::string(to_string(request.role))];
    }
    return inner_.respond(request);
  }

  int count(AgentRole role) const {
    std::lock_guard lock(mu_);
    auto it = counts_.find(std::string(to_string(role)));
    return it == counts_.end() ? 0 : it->second;
  }

 private:
  AgentBackend& inner_;
  mutable std::mutex mu_;
  std::map<std::string, int> counts_;
};

}  // namespace astg
