#include <catch2/catch_amalgamated.hpp>
#include "ggm/ggm.hpp"
