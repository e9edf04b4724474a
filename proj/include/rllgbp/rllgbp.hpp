#pragma once

#include "rllgbp/awgn.hpp"
#include "rllgbp/constraint.hpp"
#include "rllgbp/exact.hpp"
#include "rllgbp/factor_graph.hpp"
#include "rllgbp/free_energy.hpp"
#include "rllgbp/gbp.hpp"
#include "rllgbp/grid_io.hpp"
#include "rllgbp/region_graph.hpp"
#include "rllgbp/sampler.hpp"
