#pragma once

#include "psw/model.hpp"
#include "psw/threshold.hpp"
#include "psw/whittle.hpp"
#include "psw/dp.hpp"
#include "psw/policies.hpp"
#include "psw/sim.hpp"
#include "psw/structure.hpp"
#include "psw/io.hpp"
#include "psw/cli.hpp"
