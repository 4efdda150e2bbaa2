#pragma once

#include "rds/circle.hpp"
#include "rds/circle_map.hpp"
#include "rds/config.hpp"
#include "rds/csv.hpp"
#include "rds/dynamics.hpp"
#include "rds/error.hpp"
#include "rds/experiment.hpp"
#include "rds/grid_function.hpp"
#include "rds/hypothesis.hpp"
#include "rds/koopman.hpp"
#include "rds/manifest.hpp"
#include "rds/noise.hpp"
#include "rds/occupation.hpp"
#include "rds/parallel.hpp"
#include "rds/passage.hpp"
#include "rds/polynomial.hpp"
#include "rds/stats.hpp"
