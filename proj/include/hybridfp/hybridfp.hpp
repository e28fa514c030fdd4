#pragma once

// Umbrella header for the library. The experiment harness
// (hybridfp/experiment.hpp) is separate because it needs nlohmann/json.

#include "hybridfp/builtin_maps.hpp"
#include "hybridfp/classes.hpp"
#include "hybridfp/convex.hpp"
#include "hybridfp/diagnostics.hpp"
#include "hybridfp/errors.hpp"
#include "hybridfp/invariants.hpp"
#include "hybridfp/iterate.hpp"
#include "hybridfp/model_space.hpp"
#include "hybridfp/params.hpp"
#include "hybridfp/rng.hpp"
#include "hybridfp/setmap.hpp"
