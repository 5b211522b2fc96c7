#pragma once

#include "coefficients.hpp"
#include "config.hpp"
#include "density.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "index.hpp"
#include "io.hpp"
#include "noise.hpp"
#include "regularity.hpp"
#include "rng.hpp"
#include "solver.hpp"
#include "spectral_measure.hpp"
#include "stable_kernel.hpp"

namespace fracspde {

#ifdef FRACSPDE_VERSION
inline constexpr const char* version = FRACSPDE_VERSION;
#else
inline constexpr const char* version = "0.1.0";
#endif

} // namespace fracspde
