#pragma once

// Umbrella header.

#include "lqlift/empirical.hpp"
#include "lqlift/error.hpp"
#include "lqlift/exponents.hpp"
#include "lqlift/gauss_expect.hpp"
#include "lqlift/inner_max.hpp"
#include "lqlift/optimize.hpp"
#include "lqlift/parallel.hpp"
#include "lqlift/q0_closed.hpp"
#include "lqlift/quadrature.hpp"
#include "lqlift/report.hpp"
#include "lqlift/selftest.hpp"
#include "lqlift/special.hpp"
#include "lqlift/sphere.hpp"
#include "lqlift/threshold.hpp"
