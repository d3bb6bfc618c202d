/*
 * Copyright 2026 The fairaudit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "fairaudit/audit.hpp"
#include "fairaudit/cli.hpp"
#include "fairaudit/cohort.hpp"
#include "fairaudit/config.hpp"
#include "fairaudit/error.hpp"
#include "fairaudit/glm.hpp"
#include "fairaudit/matching.hpp"
#include "fairaudit/metrics.hpp"
#include "fairaudit/parallel.hpp"
#include "fairaudit/report.hpp"
#include "fairaudit/rng.hpp"
#include "fairaudit/stats.hpp"
#include "fairaudit/synth.hpp"
