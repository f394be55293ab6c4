#include <catch2/catch_amalgamated.hpp>
#include "irmmv/irmmv.hpp"
