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

// Umbrella header.

#include "astg/agent_backend.hpp"
#include "astg/agents.hpp"
#include "astg/config.hpp"
#include "astg/controller.hpp"
#include "astg/error.hpp"
#include "astg/eval.hpp"
#include "astg/geometry.hpp"
#include "astg/image_io.hpp"
#include "astg/memory.hpp"
#include "astg/pipeline.hpp"
#include "astg/prompting.hpp"
#include "astg/query.hpp"
#include "astg/remote.hpp"
#include "astg/scenes.hpp"
#include "astg/simworld.hpp"
#include "astg/tracker.hpp"
#include "astg/wire.hpp"
