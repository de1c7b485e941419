#include <catch_amalgamated.hpp>
#include "dmte/commands.hpp"

