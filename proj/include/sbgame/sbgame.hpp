#pragma once

#include "sbgame/chance.hpp"
#include "sbgame/config_io.hpp"
#include "sbgame/constraints.hpp"
#include "sbgame/csv.hpp"
#include "sbgame/experiments.hpp"
#include "sbgame/game.hpp"
#include "sbgame/model.hpp"
#include "sbgame/preconditioner.hpp"
#include "sbgame/solver.hpp"

namespace sbgame {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sbgame
