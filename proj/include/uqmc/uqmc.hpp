#pragma once

#include "uqmc/distributions.hpp"
#include "uqmc/errors.hpp"
#include "uqmc/importance.hpp"
#include "uqmc/inference.hpp"
#include "uqmc/mc.hpp"
#include "uqmc/mfmc.hpp"
#include "uqmc/mixture.hpp"
#include "uqmc/mlmc.hpp"
#include "uqmc/mmmc.hpp"
#include "uqmc/models.hpp"
#include "uqmc/parallel.hpp"
#include "uqmc/problems.hpp"
#include "uqmc/report.hpp"
#include "uqmc/rng.hpp"
#include "uqmc/stats.hpp"
#include "uqmc/version.hpp"
