#pragma once

#include "gridmix/config.hpp"
#include "gridmix/consumer.hpp"
#include "gridmix/equilibrium.hpp"
#include "gridmix/errors.hpp"
#include "gridmix/exp_poly.hpp"
#include "gridmix/firm.hpp"
#include "gridmix/io.hpp"
#include "gridmix/matrix_exp.hpp"
#include "gridmix/montecarlo.hpp"
#include "gridmix/params.hpp"
#include "gridmix/planner.hpp"
#include "gridmix/price.hpp"
#include "gridmix/riccati.hpp"
#include "gridmix/rng.hpp"
