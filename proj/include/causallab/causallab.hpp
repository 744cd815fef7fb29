#pragma once

// Umbrella header.

#include "causallab/version.hpp"
#include "causallab/errors.hpp"
#include "causallab/rng.hpp"
#include "causallab/parallel.hpp"
#include "causallab/tables.hpp"
#include "causallab/dirichlet.hpp"
#include "causallab/lr_direction.hpp"
#include "causallab/causal_sampler.hpp"
#include "causallab/dataset_io.hpp"
#include "causallab/mlp.hpp"
#include "causallab/classifier.hpp"
#include "causallab/experiments.hpp"
#include "causallab/report.hpp"
