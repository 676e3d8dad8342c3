#pragma once

#include "rcm/errors.hpp"
#include "rcm/rng.hpp"
#include "rcm/lattice.hpp"
#include "rcm/environment.hpp"
#include "rcm/env_io.hpp"
#include "rcm/cluster.hpp"
#include "rcm/parallel.hpp"
#include "rcm/walk.hpp"
#include "rcm/stats.hpp"
#include "rcm/potential.hpp"
#include "rcm/corrector.hpp"
#include "rcm/heatkernel.hpp"
#include "rcm/fourier.hpp"
#include "rcm/gradfield.hpp"
#include "rcm/homogenize.hpp"
