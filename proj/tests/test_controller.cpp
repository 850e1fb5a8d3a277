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

#include "support.hpp"

namespace astg {
namespace {

std::shared_ptr<const sim::SimWorld> world(std::uint64_t seed, sim::SimParams p = {}) {
  p.max_cuts = 0;
  return std::make_shared<const sim::SimWorld>(sim::rasterize(sim::generate(seed, p)));
}

EpisodeResult run_oracle(const sim::SimWorld& w, std::shared_ptr<const sim::SimWorld> sp,
                         const EpisodeConfig& cfg, const sim::FaultSpec& faults = {}) {
  auto b = sim::oracle_backends(std::move(sp), faults, w.scenario.seed);
  return run_episode(w.clip, split_query(w.scenario.query), {*b.agent, *b.agent, *b.tracker}, cfg);
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

void expect_counters_match_trace(const EpisodeResult& r) {
  std::map<std::string, int> from_trace;
  for (const auto& rec : r.trace) ++from_trace[std::string(to_string(rec.action))];
  for (const auto& [k, v] : from_trace) EXPECT_EQ(r.counters.at(k), v) << k;
  EXPECT_FALSE(r.trace.empty());
  EXPECT_EQ(r.trace.back().action, Action::terminate);
  for (std::size_t i = 0; i < r.trace.size(); ++i) EXPECT_EQ(r.trace[i].tick, static_cast<int>(i));
}

TEST(Policy, TableRows) {
  ControllerState s;
  s.frame_count = 10;
  EXPECT_EQ(policy(s, Observation::none), Action::propose);
  EXPECT_EQ(policy(s, Observation::advanced), Action::propose);
  EXPECT_EQ(policy(s, Observation::restarted), Action::propose);
  for (auto o : {Observation::abstained, Observation::track_fail, Observation::duplicate,
                 Observation::rejected})
    EXPECT_EQ(policy(s, o), Action::advance) << to_string(o);
  EXPECT_EQ(policy(s, Observation::accepted), Action::terminate);

  s.pending = Box{0, 0, 0, 1, 1};
  EXPECT_EQ(policy(s, Observation::proposed), Action::track);
  s.pending = Tube("t", 0, {Mask::empty(0, 2, 2)});
  EXPECT_EQ(policy(s, Observation::tracked), Action::verify);

  s.pending = std::monostate{};
  s.mode = Mode::fallback_pending;
  EXPECT_EQ(policy(s, Observation::advanced), Action::fallback);
  s.pass = 1;
  EXPECT_EQ(policy(s, Observation::advanced), Action::terminate);
}

TEST(Advance, MovesByStrideAndArmsFallback) {
  ControllerState s;
  s.frame_count = 10;
  EXPECT_EQ(advance(s, 2).cursor, 2);
  EXPECT_EQ(advance(s, 2).mode, Mode::normal);
  s.cursor = 9;
  const auto t = advance(s, 2);
  EXPECT_EQ(t.mode, Mode::fallback_pending);
  EXPECT_EQ(policy(t, Observation::advanced), Action::fallback);
  s.cursor = 8;
  EXPECT_EQ(advance(s, 1).mode, Mode::normal);
  EXPECT_THROW(advance(s, 0), ConfigError);
}

TEST(RunEpisode, OracleFindsTheTargetExactly) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto w = world(seed);
    const auto r = run_oracle(*w, w, {});
    ASSERT_EQ(r.status, EpisodeStatus::success) << "seed " << seed;
    EXPECT_EQ(r.span, w->scenario.gt_span);
    const Tube gt = trim(*w->tube_of(w->scenario.target_id), w->scenario.gt_span);
    EXPECT_DOUBLE_EQ(tube_iou(*r.tube, gt), 1.0);
    expect_counters_match_trace(r);
  }
}

TEST(RunEpisode, NoTargetFailsAfterTwoPasses) {
  sim::SimParams p;
  p.target_present = false;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto w = world(seed, p);
    ASSERT_LT(w->scenario.target_id, 0);
    for (int stride : {1, 2, 3}) {
      EpisodeConfig cfg;
      cfg.stride = stride;
      const auto r = run_oracle(*w, w, cfg);
      EXPECT_EQ(r.status, EpisodeStatus::failure);
      EXPECT_FALSE(r.tube.has_value());
      EXPECT_EQ(r.passes, 2);
      EXPECT_EQ(r.count(Action::fallback), 1);
      EXPECT_EQ(r.count(Action::propose), 2 * ceil_div(w->clip.size(), stride));
      EXPECT_EQ(r.trace.back().pass, 1);
      expect_counters_match_trace(r);
    }
  }
}

TEST(RunEpisode, DistractorIsVerifiedOnceThenFallbackRecovers) {
  sim::SimParams p;
  p.occlusion = false;
  p.entities = 2;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto w = world(seed, p);
    const int target = w->scenario.target_id;
    int distractor = -1;
    for (const auto& e : w->scenario.entities)
      if (e.id != target) distractor = e.id;
    ASSERT_GE(distractor, 0);
    // The distractor must be visible on every frame for the scripted SRA.
    bool always = true;
    for (int f = 0; f < w->clip.size(); ++f) always = always && w->visible_box(distractor, f);
    if (!always) continue;

    auto b = sim::oracle_backends(w, {}, seed);
    // Picks the distractor until the dialogue has been reseeded by the
    // ungrounded localizer, whose caption then leads it to the target.
    ScriptedAgentBackend sra([&](const AgentRequest& req) {
      AgentResponse r;
      const bool reseeded = !req.dialogue.empty() && req.dialogue.front().source == MessageSource::tra &&
                            req.dialogue.front().text.find("seen around") != std::string::npos;
      const int s = req.frames.front().source_index;
      r.box = w->visible_box(reseeded ? target : distractor, s);
      return r;
    });
    const auto r = run_episode(w->clip, split_query(w->scenario.query), {sra, *b.agent, *b.tracker}, {});
    ASSERT_EQ(r.status, EpisodeStatus::success) << "seed " << seed;
    EXPECT_EQ(r.verify_calls[0], 1);
    EXPECT_EQ(r.count(Action::fallback), 1);
    EXPECT_EQ(r.passes, 2);
    EXPECT_EQ(r.span, w->scenario.gt_span);
    int duplicates = 0;
    for (const auto& rec : r.trace)
      duplicates += rec.pass == 0 && rec.observation == Observation::duplicate ? 1 : 0;
    EXPECT_EQ(duplicates, r.count(Action::track) - 1 - r.verify_calls[1]);
    ++checked;
  }
  EXPECT_GT(checked, 3);
}

TEST(RunEpisode, FallbackResetsMemoryAndContextAndTrimsTheClip) {
  const auto w = world(4);
  auto b = sim::oracle_backends(w, {}, 4);
  // Rejects everything on the full clip; defers to the oracle once trimmed.
  ScriptedAgentBackend tra([&](const AgentRequest& req) {
    if (req.role == AgentRole::verify && req.frames.size() == static_cast<std::size_t>(w->clip.size())) {
      AgentResponse r;
      r.decision = Decision::reject;
      r.caption = "not it";
      return r;
    }
    return b.agent->respond(req);
  });
  const auto r = run_episode(w->clip, split_query(w->scenario.query), {*b.agent, tra, *b.tracker}, {});
  ASSERT_EQ(r.count(Action::fallback), 1);
  const auto it = std::find_if(r.trace.begin(), r.trace.end(),
                               [](const TraceRecord& t) { return t.action == Action::fallback; });
  EXPECT_EQ(it->detail["memory_size"], 0);
  EXPECT_EQ(it->detail["context_size"], 1);
  EXPECT_EQ(r.ungrounded_span, w->scenario.gt_span);
  EXPECT_EQ(it->detail["clip_frames"], w->scenario.gt_span.length());
  EXPECT_EQ(r.status, EpisodeStatus::success);
  EXPECT_EQ(r.span, w->scenario.gt_span);
}

TEST(RunEpisode, SecondExhaustionWithMemoryIsBestEffort) {
  const auto clip = testing::solid_clip(8, 20, 20, {10, 10, 10});
  testing::FixedAgent a;
  a.box = Box{0, 2, 2, 8, 8};
  a.verify = Decision::reject;
  a.span_full = false;
  a.span = {2, 5};
  a.caption = "";
  ScriptedAgentBackend agent(a);
  testing::BoxTracker tracker;
  const auto r = run_episode(clip, split_query("a box"), {agent, agent, tracker}, {});
  EXPECT_EQ(r.status, EpisodeStatus::best_effort);
  EXPECT_EQ(r.span, (TemporalSpan{2, 5}));
  ASSERT_TRUE(r.tube.has_value());
  EXPECT_EQ(r.tube->range(), (TemporalSpan{2, 5}));
  EXPECT_EQ(r.verify_calls[0], 1);
  EXPECT_EQ(r.verify_calls[1], 1);
  // Empty caption: the controller seeds the context itself.
  EXPECT_EQ(r.final_context.front().text.rfind("target expected within", 0), 0u);
}

TEST(RunEpisode, TrackFailAndDuplicateLeaveLiteralMessages) {
  const auto clip = testing::solid_clip(6, 20, 20, {10, 10, 10});
  testing::FixedAgent a;
  a.box = Box{0, 2, 2, 8, 8};
  ScriptedAgentBackend agent(a);
  testing::BoxTracker tracker;
  EpisodeConfig cfg;
  cfg.context_capacity = 64;
  auto r = run_episode(clip, split_query("a box"), {agent, agent, tracker}, cfg);
  auto has = [](const std::vector<Message>& ms, const std::string& text) {
    return std::any_of(ms.begin(), ms.end(), [&](const Message& m) { return m.text == text; });
  };
  EXPECT_TRUE(has(r.final_context, "duplicate"));
  tracker.fail = true;
  r = run_episode(clip, split_query("a box"), {agent, agent, tracker}, cfg);
  EXPECT_TRUE(has(r.final_context, "track-fail"));
  EXPECT_EQ(r.status, EpisodeStatus::failure);
  EXPECT_EQ(r.count(Action::verify), 0);
}

TEST(RunEpisode, FirstAcceptEndsTheSearch) {
  const auto clip = testing::solid_clip(6, 20, 20, {10, 10, 10});
  int proposals = 0;
  ScriptedAgentBackend agent([&](const AgentRequest& req) {
    AgentResponse r;
    if (req.role == AgentRole::propose) r.box = Box{0, 2, 2, 8, 8}, ++proposals;
    if (req.role == AgentRole::verify) r.decision = Decision::accept;
    if (req.role == AgentRole::localize_grounded || req.role == AgentRole::localize_ungrounded)
      r.span = std::pair{0, static_cast<int>(req.frames.size()) - 1};
    return r;
  });
  testing::BoxTracker tracker;
  const auto r = run_episode(clip, split_query("a box"), {agent, agent, tracker}, {});
  EXPECT_EQ(r.status, EpisodeStatus::success);
  EXPECT_EQ(proposals, 1);
  EXPECT_EQ(r.count(Action::verify), 1);
}

TEST(RunEpisode, VerifyNeverSeesNearDuplicatesWithinAPass) {
  sim::FaultSpec f;
  f.sra_wrong_target_prob = 0.4;
  f.tra_flip_prob = 0.2;
  f.tracker_jitter_sigma = 1.0;
  f.tracker_dropout_prob = 0.1;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto w = world(seed);
    auto b = sim::oracle_backends(w, f, seed);
    CountingAgentBackend tra(*b.agent);
    const auto r = run_episode(w->clip, split_query(w->scenario.query), {*b.agent, tra, *b.tracker}, {});
    EXPECT_LT(r.final_memory.max_pairwise_iou(), 0.5);
    EXPECT_LE(r.count(Action::propose), 2 * ceil_div(w->clip.size(), 2));
    EXPECT_LE(r.passes, 2);
    EXPECT_EQ(r.verify_calls[0] + r.verify_calls[1], tra.count(AgentRole::verify));
    expect_counters_match_trace(r);
  }
}

TEST(RunEpisode, StrideWorkloadIsMonotone) {
  sim::SimParams p;
  p.frames = 40;
  p.target_present = false;
  const auto w = world(12, p);
  int prev = 1 << 30;
  for (int stride = 1; stride <= 6; ++stride) {
    EpisodeConfig cfg;
    cfg.stride = stride;
    const int n = run_oracle(*w, w, cfg).count(Action::propose);
    EXPECT_LE(n, prev) << "stride " << stride;
    prev = n;
  }
}

TEST(RunEpisode, TraceIsReproducible) {
  sim::FaultSpec f;
  f.sra_wrong_target_prob = 0.3;
  f.format_error_prob = 0.2;
  f.tracker_jitter_sigma = 1.5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto w = world(seed);
    const auto a = episode_to_json(run_oracle(*w, w, {}, f)).dump();
    const auto b = episode_to_json(run_oracle(*w, w, {}, f)).dump();
    EXPECT_EQ(a, b);
  }
}

TEST(RunEpisode, InvalidInputsThrow) {
  const auto clip = testing::solid_clip(3, 8, 8, {0, 0, 0});
  testing::FixedAgent a;
  ScriptedAgentBackend agent(a);
  testing::BoxTracker tracker;
  EpisodeConfig bad;
  bad.stride = 0;
  EXPECT_THROW(run_episode(clip, split_query("a box"), {agent, agent, tracker}, bad), ConfigError);
  EXPECT_THROW(run_episode(clip, ParsedQuery{"x", "", ""}, {agent, agent, tracker}, {}), QueryError);
}

TEST(EpisodeJson, StableFieldNames) {
  const auto w = world(2);
  const auto j = episode_to_json(run_oracle(*w, w, {}));
  for (const char* k : {"status", "span", "tube", "passes", "verify_calls", "ungrounded_span",
                        "counters", "memory", "context", "trace"})
    EXPECT_TRUE(j.contains(k)) << k;
  for (const char* k : {"tick", "pass", "cursor", "action", "observation", "detail"})
    EXPECT_TRUE(j["trace"][0].contains(k)) << k;
  EXPECT_EQ(j["trace"][0]["action"], "Propose");
}

}  // namespace
}  // namespace astg
