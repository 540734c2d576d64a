#pragma once

#include "tempseg/core.hpp"
#include "tempseg/fusion.hpp"
#include "tempseg/metrics.hpp"
#include "tempseg/rng.hpp"
#include "tempseg/segio.hpp"
#include "tempseg/synthgen.hpp"
