#pragma once

#include "treegibbs/errors.hpp"
#include "treegibbs/config.hpp"
#include "treegibbs/model.hpp"
#include "treegibbs/tree.hpp"
#include "treegibbs/gibbs.hpp"
#include "treegibbs/random.hpp"
#include "treegibbs/stats.hpp"
#include "treegibbs/parallel.hpp"
#include "treegibbs/exact.hpp"
#include "treegibbs/state_space.hpp"
#include "treegibbs/analytics.hpp"
#include "treegibbs/spectrum.hpp"
#include "treegibbs/mixing.hpp"
#include "treegibbs/sim.hpp"
#include "treegibbs/experiments.hpp"
