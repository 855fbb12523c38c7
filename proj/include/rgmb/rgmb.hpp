#pragma once

// Everything in the library. The CLI layer (cli.hpp, config.hpp, io.hpp) also
// needs vendor/ on the include path.

#include "errors.hpp"
#include "normal.hpp"
#include "rng.hpp"
#include "quadrature.hpp"
#include "curve.hpp"
#include "matrix.hpp"
#include "parallel.hpp"
#include "gmp_kernel.hpp"
#include "timechange.hpp"
#include "priors.hpp"
#include "pathsim.hpp"
#include "mc_solver.hpp"
#include "volterra.hpp"
