#pragma once

// Umbrella header for the regime-switching dynamic Gordon growth toolkit:
// model dynamics under the physical and risk-neutral measures, conditional
// moments and bond/forward machinery, closed-form option and equity-linked
// insurance valuation, locally risk-minimizing hedging, maximum-likelihood
// estimation, and the Monte Carlo cross-check engine.

#include "ggm/errors.hpp"
#include "ggm/normal.hpp"
#include "ggm/rng.hpp"
#include "ggm/model.hpp"
#include "ggm/dynamics.hpp"
#include "ggm/moments.hpp"
#include "ggm/kernels.hpp"
#include "ggm/regimes.hpp"
#include "ggm/pricing.hpp"
#include "ggm/mc.hpp"
#include "ggm/insurance.hpp"
#include "ggm/hedging.hpp"
#include "ggm/estimation.hpp"
