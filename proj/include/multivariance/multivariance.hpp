#pragma once

// Umbrella header for the distance multivariance library.

#include "multivariance/centering.hpp"
#include "multivariance/common.hpp"
#include "multivariance/dataset.hpp"
#include "multivariance/independence.hpp"
#include "multivariance/io.hpp"
#include "multivariance/measures.hpp"
#include "multivariance/psi.hpp"
#include "multivariance/rng.hpp"
#include "multivariance/simulate.hpp"
#include "multivariance/special.hpp"
#include "multivariance/structure.hpp"
