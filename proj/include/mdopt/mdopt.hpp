#pragma once

#include "catalog.hpp"
#include "error.hpp"
#include "integrate.hpp"
#include "io.hpp"
#include "nmd.hpp"
#include "objective.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "region.hpp"
#include "schedule.hpp"
#include "sets.hpp"
#include "useq.hpp"
