#pragma once

#include "pmcmc/compartments.hpp"
#include "pmcmc/config.hpp"
#include "pmcmc/csv.hpp"
#include "pmcmc/diagnostics.hpp"
#include "pmcmc/epidemic_model.hpp"
#include "pmcmc/experiments.hpp"
#include "pmcmc/gaussian.hpp"
#include "pmcmc/observation.hpp"
#include "pmcmc/parameters.hpp"
#include "pmcmc/particle_filter.hpp"
#include "pmcmc/posterior.hpp"
#include "pmcmc/priors.hpp"
#include "pmcmc/rng.hpp"
#include "pmcmc/samplers.hpp"
