#pragma once

#include "mtsu/analysis.hpp"
#include "mtsu/bench.hpp"
#include "mtsu/core.hpp"
#include "mtsu/errors.hpp"
#include "mtsu/fm_mesma.hpp"
#include "mtsu/mesma.hpp"
#include "mtsu/metrics.hpp"
#include "mtsu/parallel.hpp"
#include "mtsu/rng.hpp"
#include "mtsu/solver.hpp"
#include "mtsu/synth.hpp"
