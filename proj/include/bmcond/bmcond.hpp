#pragma once

#include "bmcond/analytic_core.hpp"
#include "bmcond/errors.hpp"
#include "bmcond/estimator.hpp"
#include "bmcond/moments.hpp"
#include "bmcond/random.hpp"
#include "bmcond/sampler.hpp"
#include "bmcond/simulation.hpp"
#include "bmcond/special.hpp"
#include "bmcond/variance_table.hpp"
