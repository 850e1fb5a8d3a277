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

// Generates one synthetic scenario, grounds its query with the oracle
// backends and prints the result next to the ground truth.
//
//   sample_ground [seed]

#include <cstdlib>
#include <iostream>
#include <memory>

#include "astg/astg.hpp"

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 7;

  auto scenario = astg::sim::generate(seed);
  auto world = std::make_shared<const astg::sim::SimWorld>(astg::sim::rasterize(scenario));
  auto backends = astg::sim::oracle_backends(world, {}, seed);

  astg::EngineConfig cfg;
  const auto result = astg::ground(world->clip, scenario.query,
                                   {*backends.agent, *backends.agent, *backends.tracker}, cfg);

  std::cout << "query:  " << scenario.query << "\n"
            << "np:     " << result.query.np << "\n"
            << "scenes: " << result.scenes.size() << " (kept " << result.filter.kept.size() << ")\n"
            << "status: " << astg::to_string(result.status) << "\n";
  if (result.span) {
    std::cout << "span:   [" << result.span->st << ", " << result.span->ed << "]  ground truth ["
              << scenario.gt_span.st << ", " << scenario.gt_span.ed << "]\n";
  }
  const auto gt = astg::sim::ground_truth(*world, "sample");
  const auto pred = astg::to_prediction(result, "sample");
  if (gt && pred) {
    std::cout << "tIoU:   " << astg::tiou(gt->span, pred->span) << "\n"
              << "vIoU:   " << astg::viou(*gt, *pred) << "\n";
  }
  for (const auto& [action, n] : result.counters) std::cout << "  " << action << ": " << n << "\n";
  return result.status == astg::EpisodeStatus::failure ? 2 : 0;
}
