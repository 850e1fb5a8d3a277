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

// End-to-end grounding over a clip (query parsing, scene detection and
// filtering, one episode per kept scene), conversion of the result into an
// evaluation row, and the simulated sweep driven by oracle backends.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "astg/agents.hpp"
#include "astg/config.hpp"
#include "astg/controller.hpp"
#include "astg/eval.hpp"
#include "astg/query.hpp"
#include "astg/scenes.hpp"
#include "astg/simworld.hpp"

namespace astg {

struct GroundingBackends {
  AgentBackend& sra;
  AgentBackend& tra;
  TrackerBackend& tracker;
};

struct SegmentRun {
  SceneSegment segment;
  EpisodeResult episode;  // frames relative to the input clip
};

struct GroundingResult {
  ParsedQuery query;
  std::vector<SceneSegment> scenes;
  SceneFilterResult filter;
  std::vector<SegmentRun> runs;
  EpisodeStatus status = EpisodeStatus::failure;
  std::optional<Tube> tube;
  std::optional<TemporalSpan> span;
  std::map<std::string, int> counters;  // summed over runs, plus "scene_judge"
};

// Episodes run over the kept scenes in clip order. The first success wins;
// otherwise the first best-effort answer is returned.
inline GroundingResult ground(const FrameClip& clip, const std::string& raw_query,
                              GroundingBackends backends, const EngineConfig& cfg) {
  validate(cfg);
  GroundingResult out;
  out.query = parse_query(raw_query, &backends.sra, cfg.agent_retries);
  out.scenes = detect_scenes(clip, cfg.scene_threshold);
  const AgentCallOptions judge_opts{cfg.agent_retries, false, cfg.tra_resolution};
  if (cfg.scene_filter && out.scenes.size() > 1) {
    out.filter = filter_scenes(out.scenes, clip, out.query, backends.tra, judge_opts);
    out.counters["scene_judge"] = static_cast<int>(out.scenes.size());
  } else {
    out.filter.kept = out.scenes;
  }

  const EpisodeConfig ecfg = cfg.episode();
  std::optional<std::size_t> best_effort;
  for (const auto& seg : out.filter.kept) {
    EpisodeResult ep = run_episode(clip.subclip(seg.span), out.query,
                                   {backends.sra, backends.tra, backends.tracker}, ecfg);
    if (ep.tube) ep.tube = ep.tube->shifted(seg.span.st);
    if (ep.span) ep.span = ep.span->shifted(seg.span.st);
    if (ep.ungrounded_span) ep.ungrounded_span = ep.ungrounded_span->shifted(seg.span.st);
    for (const auto& [k, v] : ep.counters) out.counters[k] += v;
    const auto status = ep.status;
    out.runs.push_back({seg, std::move(ep)});
    if (status == EpisodeStatus::success) {
      best_effort.reset();
      out.status = EpisodeStatus::success;
      out.tube = out.runs.back().episode.tube;
      out.span = out.runs.back().episode.span;
      break;
    }
    if (status == EpisodeStatus::best_effort && !best_effort) best_effort = out.runs.size() - 1;
  }
  if (best_effort) {
    out.status = EpisodeStatus::best_effort;
    out.tube = out.runs[*best_effort].episode.tube;
    out.span = out.runs[*best_effort].episode.span;
  }
  return out;
}

inline nlohmann::json grounding_to_json(const GroundingResult& r, const EngineConfig& cfg) {
  nlohmann::json scenes = nlohmann::json::array();
  for (std::size_t i = 0; i < r.scenes.size(); ++i) {
    nlohmann::json s = {{"index", r.scenes[i].index}, {"span", span_to_json(r.scenes[i].span)}};
    if (i < r.filter.judgements.size()) {
      const auto& j = r.filter.judgements[i];
      s["decision"] = j.decision ? nlohmann::json(to_string(*j.decision)) : nlohmann::json(nullptr);
      s["caption"] = j.caption;
      s["errors"] = j.errors;
    }
    scenes.push_back(std::move(s));
  }
  nlohmann::json episodes = nlohmann::json::array();
  for (const auto& run : r.runs) {
    auto e = episode_to_json(run.episode);
    e["segment"] = span_to_json(run.segment.span);
    episodes.push_back(std::move(e));
  }
  return {{"config", config_to_json(cfg)},
          {"query", {{"raw", r.query.raw}, {"np", r.query.np}, {"context", r.query.context}}},
          {"scenes", scenes},
          {"scene_guard_applied", r.filter.guard_applied},
          {"episodes", episodes},
          {"counters", r.counters},
          {"result",
           {{"status", to_string(r.status)},
            {"span", r.span ? span_to_json(*r.span) : nlohmann::json(nullptr)},
            {"tube", r.tube ? nlohmann::json(r.tube->id()) : nlohmann::json(nullptr)}}}};
}

// Evaluation row for a grounding result: one box per span frame whose mask
// yields one after cleanup. Returns nullopt when nothing was grounded.
inline std::optional<Prediction> to_prediction(const GroundingResult& r, const std::string& video_id) {
  if (!r.tube || !r.span) return std::nullopt;
  Prediction p{video_id, r.query.raw, *r.span, {}};
  for (int f = r.span->st; f <= r.span->ed; ++f) {
    const Mask* m = r.tube->mask_at(f);
    if (m == nullptr) continue;
    if (auto b = mask_to_box(*m)) p.boxes.emplace(f, *b);
  }
  return p;
}

// ---- Simulation ------------------------------------------------------------

namespace sim {

// Ground truth of a rendered scenario: the target's visible box on every
// frame of its span. Nullopt when the query names no entity.
inline std::optional<GroundTruth> ground_truth(const SimWorld& w, const std::string& video_id) {
  if (w.scenario.target_id < 0) return std::nullopt;
  GroundTruth g{video_id, w.scenario.query, w.scenario.gt_span, {}};
  for (int f = g.span.st; f <= g.span.ed; ++f) {
    auto b = w.visible_box(w.scenario.target_id, f);
    if (!b) throw ScenarioError("target invisible on a span frame of " + video_id);
    g.boxes.emplace(f, *b);
  }
  return g;
}

struct SweepSpec {
  int episodes = 200;
  std::uint64_t seed = 0;
  SimParams params;
  FaultSpec faults;
  EngineConfig config;
};

struct EpisodeOutcome {
  int index = 0;
  std::uint64_t scenario_seed = 0;
  GroundingResult grounding;
  std::optional<GroundTruth> gt;
  std::optional<Prediction> prediction;
  double tiou = 0.0;
  double viou = 0.0;
  double wall_ms = 0.0;  // never written to deterministic outputs
};

inline std::uint64_t scenario_seed(std::uint64_t sweep_seed, int index) {
  return mix({sweep_seed, static_cast<std::uint64_t>(index)});
}

inline std::string video_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sim-%05d", index);
  return buf;
}

inline EpisodeOutcome run_simulated(const SweepSpec& spec, int index) {
  const auto start = std::chrono::steady_clock::now();
  EpisodeOutcome out;
  out.index = index;
  out.scenario_seed = scenario_seed(spec.seed, index);
  auto world = std::make_shared<const SimWorld>(rasterize(generate(out.scenario_seed, spec.params)));
  auto backends = oracle_backends(world, spec.faults, out.scenario_seed);
  out.grounding = ground(world->clip, world->scenario.query,
                         {*backends.agent, *backends.agent, *backends.tracker}, spec.config);
  const auto id = video_id(index);
  out.gt = ground_truth(*world, id);
  out.prediction = to_prediction(out.grounding, id);
  if (out.gt && out.prediction) {
    out.tiou = tiou(out.gt->span, out.prediction->span);
    out.viou = viou(*out.gt, *out.prediction);
  }
  out.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// Runs the sweep on a bounded worker pool. Results are ordered by episode
// index regardless of completion order. The first exception is rethrown.
inline std::vector<EpisodeOutcome> run_sweep(const SweepSpec& spec) {
  validate(spec.config);
  spec.faults.validate();
  std::vector<EpisodeOutcome> results(static_cast<std::size_t>(std::max(0, spec.episodes)));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int i = next++; i < spec.episodes; i = next++) {
      try {
        results[static_cast<std::size_t>(i)] = run_simulated(spec, i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min(spec.config.workers, spec.episodes));
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

inline const std::vector<std::string>& counter_columns() {
  static const std::vector<std::string> kCols = {"Propose", "Track",     "Verify",
                                                 "Advance", "Fallback",  "Terminate",
                                                 "scene_judge", "backend_errors"};
  return kCols;
}

// Per-episode CSV: call counters and metrics. Deterministic for a seed.
inline void write_episodes_csv(std::ostream& out, const std::vector<EpisodeOutcome>& rs,
                               int stride) {
  out << "episode,video_id,scenario_seed,stride,status,passes,segments";
  for (const auto& c : counter_columns()) out << ',' << c;
  out << ",tiou,viou\n";
  for (const auto& r : rs) {
    int passes = 0;
    for (const auto& run : r.grounding.runs) passes = std::max(passes, run.episode.passes);
    out << r.index << ',' << video_id(r.index) << ',' << r.scenario_seed << ',' << stride << ','
        << to_string(r.grounding.status) << ',' << passes << ',' << r.grounding.runs.size();
    for (const auto& c : counter_columns()) {
      auto it = r.grounding.counters.find(c);
      out << ',' << (it == r.grounding.counters.end() ? 0 : it->second);
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", r.tiou, r.viou);
    out << buf;
  }
}

inline void write_timing_csv(std::ostream& out, const std::vector<EpisodeOutcome>& rs, int stride) {
  out << "episode,stride,wall_ms\n";
  for (const auto& r : rs) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", r.wall_ms);
    out << r.index << ',' << stride << ',' << buf << '\n';
  }
}

// Metrics over the episodes whose scenario names a target.
inline MetricsReport sweep_report(const std::vector<EpisodeOutcome>& rs,
                                  const std::vector<double>& thresholds = default_thresholds()) {
  std::vector<GroundTruth> gts;
  std::vector<Prediction> preds;
  for (const auto& r : rs) {
    if (!r.gt) continue;
    gts.push_back(*r.gt);
    if (r.prediction) preds.push_back(*r.prediction);
  }
  return aggregate(gts, preds, thresholds);
}

}  // namespace sim

}  // namespace astg
