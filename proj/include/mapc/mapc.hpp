#pragma once

// Slow-time phase-coded FMCW MIMO receive chain with reiterative MMSE
// adaptive pulse compression. Header-only; see README for an overview.

#include "mapc/apc.hpp"
#include "mapc/chain.hpp"
#include "mapc/cube_io.hpp"
#include "mapc/errors.hpp"
#include "mapc/hadamard.hpp"
#include "mapc/metrics.hpp"
#include "mapc/radar_config.hpp"
#include "mapc/runner.hpp"
#include "mapc/scenario.hpp"
#include "mapc/stretch.hpp"
#include "mapc/synth.hpp"
#include "mapc/window.hpp"
