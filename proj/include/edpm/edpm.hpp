#pragma once

// Umbrella header pulling in the whole library.

#include "edpm/diagnostics.hpp"
#include "edpm/errors.hpp"
#include "edpm/experiment.hpp"
#include "edpm/gibbs.hpp"
#include "edpm/io.hpp"
#include "edpm/math.hpp"
#include "edpm/model.hpp"
#include "edpm/rng.hpp"
#include "edpm/simulate.hpp"
#include "edpm/sticks.hpp"
#include "edpm/truncation.hpp"
#include "edpm/types.hpp"
#include "edpm/vb.hpp"
