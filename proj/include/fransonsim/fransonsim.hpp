// Copyright 2026 The fransonsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "fransonsim/analysis.hpp"
#include "fransonsim/analytic.hpp"
#include "fransonsim/circuit.hpp"
#include "fransonsim/compare.hpp"
#include "fransonsim/csv.hpp"
#include "fransonsim/experiment.hpp"
#include "fransonsim/optics.hpp"
#include "fransonsim/photon_stats.hpp"
#include "fransonsim/rng.hpp"
#include "fransonsim/run_config.hpp"
