#pragma once

#include "causalrl/agents.hpp"
#include "causalrl/checkpoint.hpp"
#include "causalrl/discovery.hpp"
#include "causalrl/env.hpp"
#include "causalrl/graph.hpp"
#include "causalrl/harness.hpp"
#include "causalrl/mask.hpp"
#include "causalrl/metrics.hpp"
#include "causalrl/mlp.hpp"
#include "causalrl/rng.hpp"
#include "causalrl/state.hpp"
#include "causalrl/tabular.hpp"
#include "causalrl/topology.hpp"
#include "causalrl/trajectory.hpp"
