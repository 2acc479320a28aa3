#pragma once

#include "chainloc/bench.hpp"
#include "chainloc/errors.hpp"
#include "chainloc/geometry.hpp"
#include "chainloc/instance.hpp"
#include "chainloc/lcg.hpp"
#include "chainloc/market_model.hpp"
#include "chainloc/optimizer.hpp"
#include "chainloc/validation.hpp"
