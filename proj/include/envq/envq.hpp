#pragma once

#include "envq/types.hpp"
#include "envq/numerics.hpp"
#include "envq/env_core.hpp"
#include "envq/ct_solver.hpp"
#include "envq/embedded.hpp"
#include "envq/mg1.hpp"
#include "envq/models.hpp"
#include "envq/sim.hpp"
#include "envq/io.hpp"
