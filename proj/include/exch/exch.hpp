#pragma once

#include "exch/bounds.hpp"
#include "exch/core_numerics.hpp"
#include "exch/errors.hpp"
#include "exch/montecarlo.hpp"
#include "exch/operators.hpp"
#include "exch/oracle.hpp"
#include "exch/rng.hpp"

namespace exch {

inline constexpr const char* kVersion = "0.3.0";

}  // namespace exch
