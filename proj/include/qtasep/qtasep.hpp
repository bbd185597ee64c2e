#pragma once

#include "qtasep/cdf_table.hpp"
#include "qtasep/errors.hpp"
#include "qtasep/experiment.hpp"
#include "qtasep/hydro.hpp"
#include "qtasep/limits.hpp"
#include "qtasep/qfun.hpp"
#include "qtasep/rng.hpp"
#include "qtasep/saddle.hpp"
#include "qtasep/simulate.hpp"
#include "qtasep/stats.hpp"
#include "qtasep/version.hpp"
