#pragma once

#include "starpoly/rng.hpp"
#include "starpoly/geometry.hpp"
#include "starpoly/paths.hpp"
#include "starpoly/energy.hpp"
#include "starpoly/analysis.hpp"
#include "starpoly/sampler.hpp"
#include "starpoly/zbound.hpp"
#include "starpoly/quadrature.hpp"
#include "starpoly/verifier.hpp"
