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

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "support.hpp"

namespace astg {
namespace {

namespace fs = std::filesystem;

class ConfigFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("astg_config_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& body) {
    const auto p = dir_ / name;
    std::ofstream(p) << body;
    return p.string();
  }

  fs::path dir_;
};

TEST(EngineConfig, DefaultsMatchTheEngine) {
  const EngineConfig c;
  EXPECT_EQ(c.stride, 2);
  EXPECT_DOUBLE_EQ(c.dedup_threshold, 0.5);
  EXPECT_DOUBLE_EQ(c.sample_fps, 2.0);
  EXPECT_EQ(c.sra_resolution, 448);
  EXPECT_EQ(c.tra_resolution, 336);
  EXPECT_EQ(c.context_capacity, 16);
  EXPECT_EQ(c.agent_retries, 1);
  EXPECT_NO_THROW(validate(c));
  const auto e = c.episode();
  EXPECT_EQ(e.stride, 2);
  EXPECT_EQ(e.sra_resolution, 448);
  EXPECT_EQ(e.tra_resolution, 336);
}

TEST(EngineConfig, JsonRoundTrip) {
  EngineConfig c;
  c.stride = 3;
  c.dedup_enabled = false;
  c.agent_endpoint = "http://localhost:8080";
  c.thinking_grounded = true;
  const auto back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(EngineConfig, StrictKeysAndTypes) {
  EXPECT_THROW(config_from_json({{"strid", 2}}), ConfigError);
  EXPECT_THROW(config_from_json({{"stride", "2"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"stride", 2.5}}), ConfigError);
  EXPECT_THROW(config_from_json({{"scene_filter", 1}}), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::array()), ConfigError);
  EXPECT_DOUBLE_EQ(config_from_json({{"dedup_threshold", 1}}).dedup_threshold, 1.0);
  EXPECT_EQ(config_from_json(nlohmann::json::object()).stride, 2);
}

TEST(EngineConfig, ValidationRejectsBadValues) {
  auto bad = [](auto mutate) {
    EngineConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(validate(bad([](EngineConfig& c) { c.stride = 0; })), ConfigError);
  EXPECT_THROW(validate(bad([](EngineConfig& c) { c.sample_fps = 0; })), ConfigError);
  EXPECT_THROW(validate(bad([](EngineConfig& c) { c.dedup_threshold = 0; })), ConfigError);
  EXPECT_THROW(validate(bad([](EngineConfig& c) { c.dedup_threshold = 1.2; })), ConfigError);
  EXPECT_THROW(validate(bad([](EngineConfig& c) { c.agent_retries = 3; })), ConfigError);
  EXPECT_THROW(validate(bad([](EngineConfig& c) { c.workers = 0; })), ConfigError);
  EXPECT_THROW(validate(bad([](EngineConfig& c) { c.tracker_endpoint = "ftp://x"; })), ConfigError);
  EXPECT_THROW(validate(EngineConfig{}, true), ConfigError);
  EXPECT_NO_THROW(validate(bad([](EngineConfig& c) {
                             c.agent_endpoint = "http://127.0.0.1:9000";
                             c.tracker_endpoint = "http://tracker.local/";
                           }),
                           true));
}

TEST(Endpoint, Parsing) {
  const auto e = parse_endpoint("http://127.0.0.1:8080/");
  EXPECT_EQ(e.host, "127.0.0.1");
  EXPECT_EQ(e.port, 8080);
  EXPECT_EQ(e.base_url(), "http://127.0.0.1:8080");
  EXPECT_EQ(parse_endpoint("http://svc").port, 80);
  EXPECT_THROW(parse_endpoint("https://svc"), ConfigError);
  EXPECT_THROW(parse_endpoint("http://svc:0"), ConfigError);
  EXPECT_THROW(parse_endpoint("http://svc:99999"), ConfigError);
  EXPECT_THROW(parse_endpoint("svc:80"), ConfigError);
  EXPECT_THROW(parse_endpoint("http://svc/v1"), ConfigError);
}

// Every combination of {flag, --config file, env file} setting the stride;
// the highest-precedence source present must win.
TEST_F(ConfigFiles, PrecedenceMatrix) {
  const auto file = write("file.json", R"({"stride": 3, "workers": 2})");
  const auto env = write("env.json", R"({"stride": 4, "context_capacity": 5})");
  for (int mask = 0; mask < 8; ++mask) {
    const bool flag = mask & 1, has_file = mask & 2, has_env = mask & 4;
    const auto overrides = flag ? nlohmann::json{{"stride", 5}} : nlohmann::json::object();
    const auto cfg = resolve_config(has_file ? std::optional(file) : std::nullopt,
                                    has_env ? std::optional(env) : std::nullopt, overrides);
    const int expect = flag ? 5 : has_file ? 3 : has_env ? 4 : 2;
    EXPECT_EQ(cfg.stride, expect) << "mask " << mask;
    // The env file is only read when no --config file is given.
    EXPECT_EQ(cfg.context_capacity, (!has_file && has_env) ? 5 : 16) << "mask " << mask;
    EXPECT_EQ(cfg.workers, has_file ? 2 : 4);
  }
}

TEST_F(ConfigFiles, FileErrorsAreConfigErrors) {
  EXPECT_THROW(resolve_config(write("bad.json", "{nope"), std::nullopt), ConfigError);
  EXPECT_THROW(resolve_config(write("unk.json", R"({"speed": 1})"), std::nullopt), ConfigError);
  EXPECT_THROW(resolve_config(write("inv.json", R"({"stride": 0})"), std::nullopt), ConfigError);
  EXPECT_THROW(resolve_config((dir_ / "missing.json").string(), std::nullopt), ConfigError);
  EXPECT_THROW(resolve_config(std::nullopt, std::nullopt, {{"bogus", 1}}), ConfigError);
  EXPECT_EQ(resolve_config(std::nullopt, std::string()).stride, 2);
}

TEST(EnvConfig, ReadsTheVariable) {
  ::setenv("ASTG_CONFIG", "/tmp/some.json", 1);
  EXPECT_EQ(env_config_path(), "/tmp/some.json");
  ::setenv("ASTG_CONFIG", "", 1);
  EXPECT_FALSE(env_config_path().has_value());
  ::unsetenv("ASTG_CONFIG");
  EXPECT_FALSE(env_config_path().has_value());
}

}  // namespace
}  // namespace astg
