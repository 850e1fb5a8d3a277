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

// The episode loop: observe, decide with a fixed policy table, execute one
// of {Propose, Track, Verify, Advance, Fallback, Terminate}.
//
// Pass 0 skims the clip with stride `stride`, proposing one candidate per
// visited frame. Tracked candidates that survive the memory's dedup check
// are verified; an accepted candidate is localized and trimmed, ending the
// episode. When the cursor runs off the clip the controller falls back once:
// the clip is cut to an ungrounded span, memory and context are reset, and
// pass 1 repeats the skim on the shorter clip.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "astg/agents.hpp"
#include "astg/error.hpp"
#include "astg/geometry.hpp"
#include "astg/memory.hpp"
#include "astg/prompting.hpp"
#include "astg/tracker.hpp"

namespace astg {

enum class Action { propose, track, verify, advance, fallback, terminate };

inline std::string_view to_string(Action a) {
  switch (a) {
    case Action::propose: return "Propose";
    case Action::track: return "Track";
    case Action::verify: return "Verify";
    case Action::advance: return "Advance";
    case Action::fallback: return "Fallback";
    case Action::terminate: return "Terminate";
  }
  return "Terminate";
}

enum class Mode { normal, fallback_pending };

// Outcome of the previous action, as seen by the policy.
enum class Observation {
  none,
  proposed,
  abstained,
  tracked,
  track_fail,
  duplicate,
  accepted,
  rejected,
  advanced,
  restarted,
};

inline std::string_view to_string(Observation o) {
  switch (o) {
    case Observation::none: return "none";
    case Observation::proposed: return "proposed";
    case Observation::abstained: return "abstain";
    case Observation::tracked: return "tracked";
    case Observation::track_fail: return "track-fail";
    case Observation::duplicate: return "duplicate";
    case Observation::accepted: return "accept";
    case Observation::rejected: return "reject";
    case Observation::advanced: return "advanced";
    case Observation::restarted: return "restarted";
  }
  return "none";
}

struct ControllerState {
  Mode mode = Mode::normal;
  int cursor = 0;
  int pass = 0;  // 0 or 1
  int frame_count = 0;
  std::variant<std::monostate, Box, Tube> pending;
};

// The bounded policy. Total over every (state, observation) pair.
inline Action policy(const ControllerState& s, Observation last) {
  if (last == Observation::accepted) return Action::terminate;
  if (s.mode == Mode::fallback_pending) return s.pass == 0 ? Action::fallback : Action::terminate;
  if (std::holds_alternative<Box>(s.pending)) return Action::track;
  if (std::holds_alternative<Tube>(s.pending)) return Action::verify;
  switch (last) {
    case Observation::abstained:
    case Observation::track_fail:
    case Observation::duplicate:
    case Observation::rejected:
      return Action::advance;
    default:
      return Action::propose;
  }
}

// Moves the cursor by `stride`; running past the last frame arms the
// fallback (pass 0) or termination (pass 1).
inline ControllerState advance(ControllerState s, int stride) {
  if (stride < 1) throw ConfigError("stride must be >= 1");
  s.cursor += stride;
  s.pending = std::monostate{};
  if (s.cursor > s.frame_count - 1) s.mode = Mode::fallback_pending;
  return s;
}

struct EpisodeConfig {
  int stride = 2;
  double dedup_threshold = kDefaultDedupThreshold;
  bool dedup_enabled = true;
  int context_capacity = kDefaultContextCapacity;
  int agent_retries = 1;
  bool thinking_grounded = false;
  bool thinking_ungrounded = false;
  int sra_resolution = 448;
  int tra_resolution = 336;
  PromptStyle prompt_style;
};

struct EpisodeBackends {
  AgentBackend& sra;
  AgentBackend& tra;
  TrackerBackend& tracker;
};

enum class EpisodeStatus { success, best_effort, failure };

inline std::string_view to_string(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::success: return "success";
    case EpisodeStatus::best_effort: return "best_effort";
    case EpisodeStatus::failure: return "failure";
  }
  return "failure";
}

struct TraceRecord {
  int tick = 0;  // logical clock: position in the trace
  int pass = 0;
  int cursor = 0;
  Action action = Action::propose;
  Observation observation = Observation::none;
  nlohmann::json detail = nlohmann::json::object();
};

inline nlohmann::json trace_record_to_json(const TraceRecord& r) {
  return {{"tick", r.tick},
          {"pass", r.pass},
          {"cursor", r.cursor},
          {"action", to_string(r.action)},
          {"observation", to_string(r.observation)},
          {"detail", r.detail}};
}

struct EpisodeResult {
  EpisodeStatus status = EpisodeStatus::failure;
  std::optional<Tube> tube;          // in the input clip's frame indices
  std::optional<TemporalSpan> span;  // ditto
  std::vector<TraceRecord> trace;
  std::map<std::string, int> counters;
  int passes = 1;
  std::array<int, 2> verify_calls{0, 0};  // per pass
  std::optional<TemporalSpan> ungrounded_span;
  CandidateMemory final_memory;
  std::vector<Message> final_context;

  int count(Action a) const {
    auto it = counters.find(std::string(to_string(a)));
    return it == counters.end() ? 0 : it->second;
  }
};

inline nlohmann::json episode_to_json(const EpisodeResult& r) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& rec : r.trace) trace.push_back(trace_record_to_json(rec));
  nlohmann::json ctx = nlohmann::json::array();
  for (const auto& m : r.final_context) ctx.push_back(message_to_json(m));
  return {{"status", to_string(r.status)},
          {"span", r.span ? span_to_json(*r.span) : nlohmann::json(nullptr)},
          {"tube", r.tube ? nlohmann::json{{"id", r.tube->id()}, {"range", span_to_json(r.tube->range())}}
                          : nlohmann::json(nullptr)},
          {"passes", r.passes},
          {"verify_calls", r.verify_calls},
          {"ungrounded_span",
           r.ungrounded_span ? span_to_json(*r.ungrounded_span) : nlohmann::json(nullptr)},
          {"counters", r.counters},
          {"memory", memory_to_json(r.final_memory)},
          {"context", ctx},
          {"trace", trace}};
}

namespace detail {

inline nlohmann::json errors_json(const std::vector<std::string>& errors) {
  return nlohmann::json(errors);
}

inline std::string box_text(const Box& b) {
  return "[" + std::to_string(b.x1) + "," + std::to_string(b.y1) + "," + std::to_string(b.x2) +
         "," + std::to_string(b.y2) + "]";
}

}  // namespace detail

// Runs one grounding episode over an already scene-filtered clip. Tool
// failures are absorbed into the trace; only invalid inputs throw.
inline EpisodeResult run_episode(const FrameClip& clip, const ParsedQuery& q,
                                 EpisodeBackends backends, const EpisodeConfig& config) {
  if (clip.empty()) throw GeometryError("run_episode: empty clip");
  if (config.stride < 1) throw ConfigError("stride must be >= 1");
  if (q.np.empty()) throw QueryError("run_episode: query has no subject phrase");

  const AgentCallOptions sra_opts{config.agent_retries, false, config.sra_resolution};
  const AgentCallOptions verify_opts{config.agent_retries, false, config.tra_resolution};
  const AgentCallOptions grounded_opts{config.agent_retries, config.thinking_grounded,
                                       config.tra_resolution};
  const AgentCallOptions ungrounded_opts{config.agent_retries, config.thinking_ungrounded,
                                         config.tra_resolution};

  EpisodeResult result;
  FrameClip work = clip;
  int offset = 0;  // work frame f is input frame f + offset
  CandidateMemory memory(config.dedup_threshold, config.dedup_enabled);
  DialogueContext ctx(config.context_capacity);
  ControllerState state;
  state.frame_count = work.size();
  Observation last = Observation::none;

  auto record = [&](Action a, const ControllerState& before, Observation obs,
                    nlohmann::json detail) {
    TraceRecord rec;
    rec.tick = static_cast<int>(result.trace.size());
    rec.pass = before.pass;
    rec.cursor = before.cursor;
    rec.action = a;
    rec.observation = obs;
    rec.detail = std::move(detail);
    result.trace.push_back(std::move(rec));
    ++result.counters[std::string(to_string(a))];
  };

  for (;;) {
    const Action action = policy(state, last);
    const ControllerState before = state;

    if (action == Action::propose) {
      auto r = propose(work, state.cursor, q, ctx, backends.sra, sra_opts);
      nlohmann::json detail = {{"attempts", r.attempts}, {"errors", detail::errors_json(r.errors)}};
      result.counters["backend_errors"] += static_cast<int>(r.errors.size());
      if (r.box) {
        detail["box"] = box_to_json(*r.box);
        ctx.update(MessageSource::sra, MessageKind::status,
                   "candidate " + detail::box_text(*r.box) + " on #" + std::to_string(state.cursor));
        state.pending = *r.box;
        last = Observation::proposed;
      } else {
        detail["box"] = nullptr;
        last = Observation::abstained;
      }
      record(action, before, last, std::move(detail));

    } else if (action == Action::track) {
      const Box seed = std::get<Box>(state.pending);
      state.pending = std::monostate{};
      auto tr = track(work, seed, backends.tracker);
      nlohmann::json detail = {{"seed", box_to_json(seed)}, {"seed_frame", seed.frame_index}};
      if (!tr.ok()) {
        ctx.update(MessageSource::controller, MessageKind::status, "track-fail");
        detail["failure"] = tr.failure;
        last = Observation::track_fail;
      } else if (memory.check_and_add(*tr.tube) == CandidateMemory::Admission::duplicate) {
        ctx.update(MessageSource::controller, MessageKind::status, "duplicate");
        detail["tube"] = tr.tube->id();
        last = Observation::duplicate;
      } else {
        detail["tube"] = tr.tube->id();
        state.pending = std::move(*tr.tube);
        last = Observation::tracked;
      }
      detail["memory_size"] = memory.size();
      record(action, before, last, std::move(detail));

    } else if (action == Action::verify) {
      const Tube candidate = std::get<Tube>(state.pending);
      state.pending = std::monostate{};
      PromptStyle style = config.prompt_style;
      style.label_text = std::to_string(memory.size());
      const FrameClip v_sp = spatial_prompt(work, candidate, style);
      auto vr = verify(v_sp, q, backends.tra, verify_opts, &candidate);
      ++result.verify_calls[static_cast<std::size_t>(state.pass)];
      result.counters["backend_errors"] += static_cast<int>(vr.errors.size());
      nlohmann::json detail = {{"candidate", candidate.id()},
                               {"decision", to_string(vr.decision)},
                               {"caption", vr.caption},
                               {"errors", detail::errors_json(vr.errors)}};
      last = Observation::rejected;
      if (vr.decision == Decision::accept) {
        const FrameClip v_stp = temporal_prompt(v_sp, style);
        auto lr = localize_grounded(v_stp, q, backends.tra, grounded_opts, &candidate);
        result.counters["backend_errors"] += static_cast<int>(lr.errors.size());
        detail["span"] = span_to_json(lr.span);
        detail["localize_errors"] = detail::errors_json(lr.errors);
        try {
          const Tube trimmed = trim(candidate, lr.span);
          result.tube = trimmed.shifted(offset);
          result.span = trimmed.range().shifted(offset);
          result.status = EpisodeStatus::success;
          last = Observation::accepted;
        } catch (const GeometryError&) {
          ctx.update(MessageSource::tra, MessageKind::caption,
                     "localized span does not overlap the candidate");
        }
      } else {
        ctx.update(MessageSource::tra, MessageKind::caption, vr.caption);
      }
      record(action, before, last, std::move(detail));

    } else if (action == Action::advance) {
      state = advance(state, config.stride);
      last = Observation::advanced;
      record(action, before, last,
             {{"to", state.cursor}, {"exhausted", state.mode == Mode::fallback_pending}});

    } else if (action == Action::fallback) {
      const FrameClip v_tp = temporal_prompt(work, config.prompt_style);
      auto lr = localize_ungrounded(v_tp, q, backends.tra, ungrounded_opts);
      result.counters["backend_errors"] += static_cast<int>(lr.errors.size());
      const TemporalSpan local = lr.span;
      result.ungrounded_span = local.shifted(offset);
      work = work.subclip(local);
      offset += local.st;
      memory.clear();
      std::string seed_text = lr.caption;
      if (seed_text.empty())
        seed_text = "target expected within #" + std::to_string(0) + " to #" +
                    std::to_string(work.size() - 1);
      ctx.reset_to(MessageSource::tra, MessageKind::caption, seed_text);
      state = ControllerState{};
      state.pass = 1;
      state.frame_count = work.size();
      result.passes = 2;
      last = Observation::restarted;
      record(action, before, last,
             {{"span", span_to_json(local)},
              {"absolute_span", span_to_json(*result.ungrounded_span)},
              {"caption", seed_text},
              {"defaulted", lr.defaulted},
              {"errors", detail::errors_json(lr.errors)},
              {"memory_size", memory.size()},
              {"context_size", ctx.size()},
              {"clip_frames", work.size()}});

    } else {  // terminate
      if (result.status != EpisodeStatus::success) {
        if (!memory.empty()) {
          result.status = EpisodeStatus::best_effort;
          result.tube = memory.tubes().front().shifted(offset);
          result.span = work.full_span().shifted(offset);
        } else {
          result.status = EpisodeStatus::failure;
        }
      }
      nlohmann::json detail = {{"status", to_string(result.status)}};
      if (result.span) detail["span"] = span_to_json(*result.span);
      record(action, before, Observation::none, std::move(detail));
      break;
    }
  }

  result.final_memory = memory;
  result.final_context = ctx.messages();
  return result;
}

}  // namespace astg
