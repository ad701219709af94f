#pragma once

#include "fbmtest/errors.hpp"
#include "fbmtest/gchi2.hpp"
#include "fbmtest/model_cov.hpp"
#include "fbmtest/parallel.hpp"
#include "fbmtest/power.hpp"
#include "fbmtest/rng.hpp"
#include "fbmtest/sim.hpp"
#include "fbmtest/testkit.hpp"

namespace fbmtest {
inline constexpr const char* kVersion = "0.1.0";
}
