/*
 * Copyright 2026 The pdsrl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "pdsrl/common.hpp"
#include "pdsrl/harness/config.hpp"
#include "pdsrl/harness/experiment.hpp"
#include "pdsrl/harness/metrics.hpp"
#include "pdsrl/harness/serialize.hpp"
#include "pdsrl/learners.hpp"
#include "pdsrl/mdp_planner.hpp"
#include "pdsrl/model.hpp"
#include "pdsrl/pds_core.hpp"
#include "pdsrl/phy.hpp"
#include "pdsrl/power_mgmt.hpp"
#include "pdsrl/sim_env.hpp"
#include "pdsrl/traffic_queue.hpp"
