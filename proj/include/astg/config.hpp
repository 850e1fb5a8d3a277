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

// Engine configuration: built-in defaults, overlaid by a JSON config file,
// overlaid by command-line flags. Unknown keys are rejected.

#include <cstdlib>
#include <fstream>
#include <optional>
#include <regex>
#include <string>

#include <nlohmann/json.hpp>

#include "astg/controller.hpp"
#include "astg/error.hpp"
#include "astg/scenes.hpp"

namespace astg {

struct Endpoint {
  std::string scheme;  // always "http"; TLS is not built in
  std::string host;
  int port = 0;

  std::string base_url() const { return scheme + "://" + host + ":" + std::to_string(port); }
};

// Accepts http://host[:port] with an optional trailing slash.
inline Endpoint parse_endpoint(const std::string& url) {
  static const std::regex re(R"(^(http)://([A-Za-z0-9._-]+|\[[0-9A-Fa-f:]+\])(?::(\d{1,5}))?/?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ConfigError("malformed endpoint: '" + url + "'");
  Endpoint e;
  e.scheme = m[1];
  e.host = m[2];
  e.port = m[3].matched ? std::stoi(m[3]) : 80;
  if (e.port < 1 || e.port > 65535) throw ConfigError("endpoint port out of range: '" + url + "'");
  return e;
}

struct EngineConfig {
  int stride = 2;
  double dedup_threshold = kDefaultDedupThreshold;
  bool dedup_enabled = true;
  double sample_fps = 2.0;
  int sra_resolution = 448;
  int tra_resolution = 336;
  double scene_threshold = kDefaultSceneThreshold;
  bool scene_filter = true;
  int context_capacity = kDefaultContextCapacity;
  std::string agent_endpoint;
  std::string tracker_endpoint;
  int agent_retries = 1;
  int agent_timeout_ms = 30000;
  int tracker_timeout_ms = 60000;
  bool thinking_grounded = false;
  bool thinking_ungrounded = false;
  int workers = 4;

  EpisodeConfig episode() const {
    EpisodeConfig e;
    e.stride = stride;
    e.dedup_threshold = dedup_threshold;
    e.dedup_enabled = dedup_enabled;
    e.context_capacity = context_capacity;
    e.agent_retries = agent_retries;
    e.thinking_grounded = thinking_grounded;
    e.thinking_ungrounded = thinking_ungrounded;
    e.sra_resolution = sra_resolution;
    e.tra_resolution = tra_resolution;
    return e;
  }
};

inline void to_json(nlohmann::json& j, const EngineConfig& c) {
  j = nlohmann::json{
      {"stride", c.stride},
      {"dedup_threshold", c.dedup_threshold},
      {"dedup_enabled", c.dedup_enabled},
      {"sample_fps", c.sample_fps},
      {"sra_resolution", c.sra_resolution},
      {"tra_resolution", c.tra_resolution},
      {"scene_threshold", c.scene_threshold},
      {"scene_filter", c.scene_filter},
      {"context_capacity", c.context_capacity},
      {"agent_endpoint", c.agent_endpoint},
      {"tracker_endpoint", c.tracker_endpoint},
      {"agent_retries", c.agent_retries},
      {"agent_timeout_ms", c.agent_timeout_ms},
      {"tracker_timeout_ms", c.tracker_timeout_ms},
      {"thinking_grounded", c.thinking_grounded},
      {"thinking_ungrounded", c.thinking_ungrounded},
      {"workers", c.workers}};
}

// Missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, EngineConfig& c) {
  if (auto it = j.find("stride"); it != j.end()) it->get_to(c.stride);
  if (auto it = j.find("dedup_threshold"); it != j.end()) it->get_to(c.dedup_threshold);
  if (auto it = j.find("dedup_enabled"); it != j.end()) it->get_to(c.dedup_enabled);
  if (auto it = j.find("sample_fps"); it != j.end()) it->get_to(c.sample_fps);
  if (auto it = j.find("sra_resolution"); it != j.end()) it->get_to(c.sra_resolution);
  if (auto it = j.find("tra_resolution"); it != j.end()) it->get_to(c.tra_resolution);
  if (auto it = j.find("scene_threshold"); it != j.end()) it->get_to(c.scene_threshold);
  if (auto it = j.find("scene_filter"); it != j.end()) it->get_to(c.scene_filter);
  if (auto it = j.find("context_capacity"); it != j.end()) it->get_to(c.context_capacity);
  if (auto it = j.find("agent_endpoint"); it != j.end()) it->get_to(c.agent_endpoint);
  if (auto it = j.find("tracker_endpoint"); it != j.end()) it->get_to(c.tracker_endpoint);
  if (auto it = j.find("agent_retries"); it != j.end()) it->get_to(c.agent_retries);
  if (auto it = j.find("agent_timeout_ms"); it != j.end()) it->get_to(c.agent_timeout_ms);
  if (auto it = j.find("tracker_timeout_ms"); it != j.end()) it->get_to(c.tracker_timeout_ms);
  if (auto it = j.find("thinking_grounded"); it != j.end()) it->get_to(c.thinking_grounded);
  if (auto it = j.find("thinking_ungrounded"); it != j.end()) it->get_to(c.thinking_ungrounded);
  if (auto it = j.find("workers"); it != j.end()) it->get_to(c.workers);
}

// Throws ConfigError on the first violated constraint. Endpoints are only
// required when `remote` is set, but are checked whenever present.
inline void validate(const EngineConfig& c, bool remote = false) {
  auto positive = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(c.stride >= 1, "stride");
  positive(c.sample_fps > 0.0, "sample_fps");
  positive(c.sra_resolution > 0, "sra_resolution");
  positive(c.tra_resolution > 0, "tra_resolution");
  positive(c.scene_threshold > 0.0, "scene_threshold");
  positive(c.context_capacity >= 1, "context_capacity");
  positive(c.agent_timeout_ms > 0, "agent_timeout_ms");
  positive(c.tracker_timeout_ms > 0, "tracker_timeout_ms");
  positive(c.workers >= 1, "workers");
  if (!(c.dedup_threshold > 0.0 && c.dedup_threshold <= 1.0))
    throw ConfigError("dedup_threshold must lie in (0, 1]");
  if (c.agent_retries < 0 || c.agent_retries > kMaxAgentRetries)
    throw ConfigError("agent_retries must lie in [0, " + std::to_string(kMaxAgentRetries) + "]");
  if (remote && (c.agent_endpoint.empty() || c.tracker_endpoint.empty()))
    throw ConfigError("remote backend needs agent_endpoint and tracker_endpoint");
  if (!c.agent_endpoint.empty()) parse_endpoint(c.agent_endpoint);
  if (!c.tracker_endpoint.empty()) parse_endpoint(c.tracker_endpoint);
}

inline nlohmann::json config_to_json(const EngineConfig& c) { return c; }

// Strict conversion: every key must be known and correctly typed.
inline EngineConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const nlohmann::json defaults = EngineConfig{};
  for (const auto& [key, value] : j.items()) {
    const auto it = defaults.find(key);
    if (it == defaults.end()) throw ConfigError("unknown config key: " + key);
    const bool numeric_ok = it->is_number() && value.is_number() &&
                            (it->is_number_float() || value.is_number_integer());
    if (it->type() != value.type() && !numeric_ok)
      throw ConfigError("config key '" + key + "' has the wrong type");
  }
  try {
    return j.get<EngineConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed config file " + path + ": " + e.what());
  }
}

// Layers defaults < file < flags. The file is `config_flag` when given,
// else `env_config` (the ASTG_CONFIG value) when non-empty.
inline EngineConfig resolve_config(const std::optional<std::string>& config_flag,
                                   const std::optional<std::string>& env_config,
                                   const nlohmann::json& flag_overrides = nlohmann::json::object()) {
  nlohmann::json merged = config_to_json(EngineConfig{});
  std::optional<std::string> path = config_flag;
  if (!path && env_config && !env_config->empty()) path = env_config;
  if (path) {
    const auto file = read_json_file(*path);
    config_from_json(file);  // key and type check
    merged.merge_patch(file);
  }
  config_from_json(flag_overrides);
  merged.merge_patch(flag_overrides);
  auto cfg = config_from_json(merged);
  validate(cfg);
  return cfg;
}

inline std::optional<std::string> env_config_path() {
  const char* v = std::getenv("ASTG_CONFIG");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

}  // namespace astg
