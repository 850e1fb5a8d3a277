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

#include <algorithm>
#include <deque>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astg/agent_backend.hpp"
#include "astg/geometry.hpp"

namespace astg {

inline constexpr double kDefaultDedupThreshold = 0.5;
inline constexpr int kDefaultContextCapacity = 16;

// Store of tubes already handed to the verifier. A new tube is a duplicate
// when its tube IoU with any stored tube reaches the threshold.
class CandidateMemory {
 public:
  enum class Admission { added, duplicate };

  explicit CandidateMemory(double threshold = kDefaultDedupThreshold, bool dedup = true)
      : threshold_(threshold), dedup_(dedup) {}

  // With dedup disabled every tube is admitted.
  Admission check_and_add(const Tube& t) {
    if (dedup_) {
      for (const auto& stored : tubes_) {
        if (tube_iou(t, stored) >= threshold_) return Admission::duplicate;
      }
    }
    tubes_.push_back(t);
    return Admission::added;
  }

  void clear() { tubes_.clear(); }
  bool empty() const { return tubes_.empty(); }
  std::size_t size() const { return tubes_.size(); }
  const std::vector<Tube>& tubes() const { return tubes_; }
  double threshold() const { return threshold_; }
  bool dedup_enabled() const { return dedup_; }

  // Largest pairwise IoU among stored tubes; 0 for fewer than two.
  double max_pairwise_iou() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < tubes_.size(); ++i)
      for (std::size_t j = i + 1; j < tubes_.size(); ++j)
        worst = std::max(worst, tube_iou(tubes_[i], tubes_[j]));
    return worst;
  }

 private:
  double threshold_;
  bool dedup_;
  std::vector<Tube> tubes_;
};

// Bounded, chronological message log shared by the agents. Oldest messages
// are evicted first.
class DialogueContext {
 public:
  explicit DialogueContext(int capacity = kDefaultContextCapacity)
      : capacity_(std::max(1, capacity)) {}

  void update(MessageSource source, MessageKind kind, std::string text) {
    messages_.push_back({source, kind, std::move(text)});
    while (static_cast<int>(messages_.size()) > capacity_) messages_.pop_front();
  }

  void clear() { messages_.clear(); }

  // Drops everything; the given message becomes the only entry.
  void reset_to(MessageSource source, MessageKind kind, std::string text) {
    clear();
    update(source, kind, std::move(text));
  }

  std::size_t size() const { return messages_.size(); }
  int capacity() const { return capacity_; }
  std::vector<Message> messages() const { return {messages_.begin(), messages_.end()}; }

  bool contains_text(std::string_view needle) const {
    return std::any_of(messages_.begin(), messages_.end(), [&](const Message& m) {
      return m.text.find(needle) != std::string::npos;
    });
  }

 private:
  int capacity_;
  std::deque<Message> messages_;
};

inline nlohmann::json message_to_json(const Message& m) {
  return {{"source", to_string(m.source)}, {"kind", to_string(m.kind)}, {"text", m.text}};
}

inline Message message_from_json(const nlohmann::json& j) {
  try {
    return {message_source_from_string(j.at("source").get<std::string>()),
            message_kind_from_string(j.at("kind").get<std::string>()),
            j.at("text").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("malformed dialogue message: ") + e.what());
  }
}

inline nlohmann::json context_to_json(const DialogueContext& c) {
  auto arr = nlohmann::json::array();
  for (const auto& m : c.messages()) arr.push_back(message_to_json(m));
  return arr;
}

// Summary form used in traces: ids and frame ranges, not masks.
inline nlohmann::json memory_to_json(const CandidateMemory& m) {
  auto arr = nlohmann::json::array();
  for (const auto& t : m.tubes()) {
    std::int64_t area = 0;
    for (const auto& mask : t.masks()) area += mask.area();
    arr.push_back({{"id", t.id()}, {"range", span_to_json(t.range())}, {"area", area}});
  }
  return {{"threshold", m.threshold()}, {"dedup", m.dedup_enabled()}, {"tubes", arr}};
}

}  // namespace astg
