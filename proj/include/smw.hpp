#pragma once

// Umbrella header.

#include "smw/bounds.hpp"
#include "smw/config.hpp"
#include "smw/constructions.hpp"
#include "smw/experiments.hpp"
#include "smw/figures.hpp"
#include "smw/linalg.hpp"
#include "smw/noise.hpp"
#include "smw/perturbation.hpp"
#include "smw/random.hpp"
#include "smw/verification.hpp"
#include "smw/woodbury.hpp"
