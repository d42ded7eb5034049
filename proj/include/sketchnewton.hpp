#pragma once

#include "sketchnewton/errors.hpp"
#include "sketchnewton/rng.hpp"
#include "sketchnewton/linalg.hpp"
#include "sketchnewton/sketch.hpp"
#include "sketchnewton/problems.hpp"
#include "sketchnewton/newton.hpp"
#include "sketchnewton/solvers.hpp"
#include "sketchnewton/data_io.hpp"
#include "sketchnewton/harness.hpp"
