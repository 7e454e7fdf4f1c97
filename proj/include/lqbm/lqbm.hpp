// lqbm.hpp: umbrella header

#pragma once

#include "lqbm/coefficients.hpp"
#include "lqbm/digamma.hpp"
#include "lqbm/error.hpp"
#include "lqbm/fock.hpp"
#include "lqbm/io.hpp"
#include "lqbm/linear_dynamics.hpp"
#include "lqbm/ode.hpp"
#include "lqbm/phase_space.hpp"
#include "lqbm/quadratic_dynamics.hpp"
#include "lqbm/quadratic_source.hpp"
#include "lqbm/sweep.hpp"
