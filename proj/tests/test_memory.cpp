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

// Ten frames; the first `shared` frames equal `base`, the rest are disjoint.
Tube overlapping(const std::string& id, int shared) {
  std::vector<Mask> masks;
  for (int f = 0; f < 10; ++f) {
    const Box b = f < shared ? Box{f, 1, 1, 6, 6} : Box{f, 10, 10, 15, 15};
    masks.push_back(Mask::from_box(16, 16, b));
  }
  return Tube(id, 0, std::move(masks));
}

Tube base() { return overlapping("base", 10); }

TEST(CandidateMemory, AddAndDuplicate) {
  CandidateMemory m;
  EXPECT_EQ(m.check_and_add(base()), CandidateMemory::Admission::added);
  EXPECT_EQ(m.check_and_add(base().with_id("again")), CandidateMemory::Admission::duplicate);
  EXPECT_EQ(m.size(), 1u);
  EXPECT_EQ(m.tubes()[0].id(), "base");
}

TEST(CandidateMemory, OverlapBelowThresholdIsAdded) {
  const Tube t = overlapping("t", 4);
  ASSERT_DOUBLE_EQ(tube_iou(t, base()), 0.4);
  CandidateMemory m(0.5);
  m.check_and_add(base());
  EXPECT_EQ(m.check_and_add(t), CandidateMemory::Admission::added);
  EXPECT_EQ(m.size(), 2u);
}

TEST(CandidateMemory, ThresholdIsInclusive) {
  const Tube t = overlapping("t", 5);
  ASSERT_DOUBLE_EQ(tube_iou(t, base()), 0.5);
  CandidateMemory m(0.5);
  m.check_and_add(base());
  EXPECT_EQ(m.check_and_add(t), CandidateMemory::Admission::duplicate);
}

TEST(CandidateMemory, DisabledDedupAdmitsEverything) {
  CandidateMemory m(0.5, false);
  m.check_and_add(base());
  EXPECT_EQ(m.check_and_add(base()), CandidateMemory::Admission::added);
  EXPECT_EQ(m.size(), 2u);
  EXPECT_DOUBLE_EQ(m.max_pairwise_iou(), 1.0);
}

TEST(CandidateMemory, RandomSequencesKeepStoredTubesApart) {
  testing::Rng rng(17);
  for (int run = 0; run < 40; ++run) {
    const double theta = 0.2 + 0.6 * testing::uniform01(rng);
    CandidateMemory m(theta);
    for (int k = 0; k < 25; ++k) {
      const Tube t = testing::random_tube(rng, "t" + std::to_string(k), testing::uniform(rng, 0, 3),
                                          testing::uniform(rng, 1, 4), 6, 5);
      const auto before = m.tubes();
      if (m.check_and_add(t) == CandidateMemory::Admission::duplicate) {
        ASSERT_EQ(m.tubes(), before);
      } else {
        ASSERT_EQ(m.size(), before.size() + 1);
      }
      ASSERT_LT(m.max_pairwise_iou(), theta);
    }
  }
}

TEST(CandidateMemory, SummaryJson) {
  CandidateMemory m;
  m.check_and_add(base());
  const auto j = memory_to_json(m);
  EXPECT_EQ(j["threshold"], 0.5);
  EXPECT_EQ(j["tubes"][0]["id"], "base");
  EXPECT_EQ(j["tubes"][0]["range"], nlohmann::json({0, 9}));
  EXPECT_EQ(j["tubes"][0]["area"], 250);
}

TEST(DialogueContext, AppendAndEvictOldest) {
  DialogueContext c(3);
  c.update(MessageSource::sra, MessageKind::caption, "a");
  EXPECT_EQ(c.size(), 1u);
  c.update(MessageSource::tra, MessageKind::caption, "b");
  c.update(MessageSource::controller, MessageKind::status, "c");
  c.update(MessageSource::tra, MessageKind::correction, "d");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.messages().front().text, "b");
  EXPECT_EQ(c.messages().back().text, "d");
  EXPECT_FALSE(c.contains_text("a"));
}

TEST(DialogueContext, ResetLeavesOnlyTheSeed) {
  DialogueContext c;
  for (int i = 0; i < 20; ++i) c.update(MessageSource::sra, MessageKind::caption, std::to_string(i));
  EXPECT_EQ(c.size(), 16u);
  c.reset_to(MessageSource::tra, MessageKind::caption, "the red block moves left");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.messages()[0], (Message{MessageSource::tra, MessageKind::caption, "the red block moves left"}));
}

TEST(DialogueContext, JsonRoundTripIsLossless) {
  DialogueContext c(4);
  c.update(MessageSource::sra, MessageKind::caption, "x");
  c.update(MessageSource::controller, MessageKind::correction, "format error: \"quoted\"");
  const auto j = context_to_json(c);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[1]["source"], "Controller");
  EXPECT_EQ(j[1]["kind"], "correction");
  std::vector<Message> back;
  for (const auto& m : j) back.push_back(message_from_json(m));
  EXPECT_EQ(back, c.messages());
  EXPECT_THROW(message_from_json({{"source", "Oracle"}, {"kind", "caption"}, {"text", ""}}), BackendError);
  EXPECT_THROW(message_from_json({{"source", "SRA"}}), BackendError);
}

}  // namespace
}  // namespace astg
