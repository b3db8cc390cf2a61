#pragma once

// Umbrella header: potential-coefficient reconstruction for -div(grad u) + q u = f
// from noisy point samples, with P1 FEM, adjoint gradients, projected CG, and
// a priori / adaptive regularization-parameter rules.

#include "invpot/errors.hpp"
#include "invpot/fem.hpp"
#include "invpot/functions.hpp"
#include "invpot/harness.hpp"
#include "invpot/inversion.hpp"
#include "invpot/io.hpp"
#include "invpot/mesh.hpp"
#include "invpot/observation.hpp"
#include "invpot/rng.hpp"
#include "invpot/sparse.hpp"
