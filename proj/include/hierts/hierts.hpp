#pragma once

/// Umbrella header for the hierarchical Thompson sampling simulation library.

#include "hierts/agents.hpp"
#include "hierts/bounds.hpp"
#include "hierts/config.hpp"
#include "hierts/env.hpp"
#include "hierts/errors.hpp"
#include "hierts/gaussian.hpp"
#include "hierts/harness.hpp"
#include "hierts/io.hpp"
#include "hierts/posterior.hpp"
#include "hierts/random.hpp"
#include "hierts/schedule.hpp"
