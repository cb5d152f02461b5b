#pragma once

#include "tmsf/error.hpp"
#include "tmsf/linalg.hpp"
#include "tmsf/shift_space.hpp"
#include "tmsf/potential.hpp"
#include "tmsf/cohomology.hpp"
#include "tmsf/measure.hpp"
#include "tmsf/thermo.hpp"
#include "tmsf/mixing.hpp"
