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

// Role-specific wrappers around an AgentBackend: SRA proposal, TRA scene
// judgement, tube verification and grounded/ungrounded temporal
// localization. Every wrapper validates the response against its role's
// schema, retries at most twice, and degrades to a fixed safe answer when
// the backend keeps failing. Invalid payloads never leave this header.

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "astg/agent_backend.hpp"
#include "astg/geometry.hpp"
#include "astg/memory.hpp"

namespace astg {

inline constexpr int kMaxAgentRetries = 2;

struct AgentCallOptions {
  int retries = 1;
  bool thinking = false;
  int resolution = 0;  // 0: backend default

  int clamped_retries() const { return std::clamp(retries, 0, kMaxAgentRetries); }
};

inline constexpr std::string_view kVerificationUnavailable = "verification unavailable";

struct ProposeResult {
  std::optional<Box> box;  // nullopt: abstain
  int attempts = 0;
  std::vector<std::string> errors;
};

struct VerifyResult {
  Decision decision = Decision::reject;
  std::string caption;
  int attempts = 0;
  std::vector<std::string> errors;
  bool unavailable = false;
};

struct LocalizeResult {
  TemporalSpan span;
  std::string caption;
  int attempts = 0;
  std::vector<std::string> errors;
  bool defaulted = false;  // backend never produced a span; full clip returned
};

struct SceneJudgement {
  std::optional<Decision> decision;  // nullopt: backend failed
  std::string caption;
  std::vector<std::string> errors;
};

namespace detail {

inline AgentRequest make_request(AgentRole role, const FrameClip& clip, std::vector<Frame> frames,
                                 const ParsedQuery& q, const AgentCallOptions& opts) {
  AgentRequest req;
  req.role = role;
  req.width = clip.width();
  req.height = clip.height();
  req.frames = std::move(frames);
  req.query = q;
  req.options = {{"thinking", opts.thinking}};
  if (opts.resolution > 0) req.options["resolution"] = opts.resolution;
  return req;
}

// Calls the backend until the response passes the schema. Returns nullopt
// after 1 + retries failures. `on_malformed` runs before each retry that
// follows a schema failure (not after transport errors).
template <class OnMalformed>
std::optional<AgentResponse> call_validated(AgentBackend& backend, AgentRequest& req, int retries,
                                            int& attempts, std::vector<std::string>& errors,
                                            OnMalformed&& on_malformed) {
  for (int attempt = 0; attempt <= retries; ++attempt) {
    ++attempts;
    try {
      auto resp = backend.respond(req);
      const auto problem = response_schema_error(req, resp);
      if (!problem) return resp;
      errors.push_back(std::string(to_string(req.role)) + ": " + *problem);
      if (attempt < retries) on_malformed(*problem);
    } catch (const BackendError& e) {
      errors.push_back(std::string(to_string(req.role)) + ": " + e.what());
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Swaps a reversed span and clamps it into [0, frame_count - 1].
inline TemporalSpan normalize_span(std::pair<int, int> raw, int frame_count) {
  int st = raw.first, ed = raw.second;
  if (st > ed) std::swap(st, ed);
  st = std::clamp(st, 0, frame_count - 1);
  ed = std::clamp(ed, 0, frame_count - 1);
  return {st, ed};
}

// SRA: one candidate box on frame `t` of `clip`, or abstain. A malformed box
// earns a correction message in `ctx` and another try.
inline ProposeResult propose(const FrameClip& clip, int t, const ParsedQuery& q,
                             DialogueContext& ctx, AgentBackend& backend,
                             const AgentCallOptions& opts = {}) {
  ProposeResult result;
  auto req = detail::make_request(AgentRole::propose, clip, {clip[t]}, q, opts);
  req.dialogue = ctx.messages();
  const auto resp = detail::call_validated(
      backend, req, opts.clamped_retries(), result.attempts, result.errors,
      [&](const std::string& problem) {
        ctx.update(MessageSource::controller, MessageKind::correction,
                   "format error: " + problem +
                       "; answer with one box [x1,y1,x2,y2] inside the frame, or null");
        req.dialogue = ctx.messages();
      });
  if (resp && resp->box) {
    result.box = *resp->box;
    result.box->frame_index = t;
  }
  return result;
}

// TRA as scene filter: is this segment relevant to the query at all?
inline SceneJudgement judge_scene(const FrameClip& segment, const ParsedQuery& q,
                                  AgentBackend& backend, const AgentCallOptions& opts = {}) {
  SceneJudgement out;
  auto req = detail::make_request(AgentRole::scene_judge, segment, segment.frames(), q, opts);
  int attempts = 0;
  const auto resp = detail::call_validated(backend, req, opts.clamped_retries(), attempts,
                                           out.errors, [](const std::string&) {});
  if (resp) {
    out.decision = resp->decision;
    out.caption = resp->caption.value_or("");
  }
  return out;
}

// TRA as tube verifier on spatially prompted frames. Fails closed: a
// backend that never answers yields a reject.
inline VerifyResult verify(const FrameClip& v_sp, const ParsedQuery& q, AgentBackend& backend,
                           const AgentCallOptions& opts = {}, const Tube* candidate = nullptr) {
  VerifyResult out;
  auto req = detail::make_request(AgentRole::verify, v_sp, v_sp.frames(), q, opts);
  if (candidate) req.candidate = *candidate;
  const auto resp = detail::call_validated(backend, req, opts.clamped_retries(), out.attempts,
                                           out.errors, [](const std::string&) {});
  if (!resp) {
    out.unavailable = true;
    out.caption = std::string(kVerificationUnavailable);
    return out;
  }
  out.decision = *resp->decision;
  out.caption = resp->caption.value_or("");
  return out;
}

namespace detail {

inline LocalizeResult localize(AgentRole role, const FrameClip& clip, const ParsedQuery& q,
                               AgentBackend& backend, const AgentCallOptions& opts,
                               const Tube* candidate) {
  LocalizeResult out;
  auto req = make_request(role, clip, clip.frames(), q, opts);
  if (candidate) req.candidate = *candidate;
  const auto resp = call_validated(backend, req, opts.clamped_retries(), out.attempts, out.errors,
                                   [](const std::string&) {});
  if (!resp) {
    out.defaulted = true;
    out.span = clip.full_span();
    return out;
  }
  out.span = normalize_span(*resp->span, clip.size());
  out.caption = resp->caption.value_or("");
  return out;
}

}  // namespace detail

// TRA as grounded temporal localizer on spatio-temporally prompted frames.
inline LocalizeResult localize_grounded(const FrameClip& v_stp, const ParsedQuery& q,
                                        AgentBackend& backend, const AgentCallOptions& opts = {},
                                        const Tube* candidate = nullptr) {
  return detail::localize(AgentRole::localize_grounded, v_stp, q, backend, opts, candidate);
}

// TRA as ungrounded localizer (fallback): temporal prompts only. The caption
// seeds the dialogue context of the second pass.
inline LocalizeResult localize_ungrounded(const FrameClip& v_tp, const ParsedQuery& q,
                                          AgentBackend& backend,
                                          const AgentCallOptions& opts = {}) {
  return detail::localize(AgentRole::localize_ungrounded, v_tp, q, backend, opts, nullptr);
}

}  // namespace astg
