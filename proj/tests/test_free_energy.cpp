#include <catch2/catch_amalgamated.hpp>

#include "rllgbp/rllgbp.hpp"
