#pragma once

// Everything at once. Individual headers can be included on their own.

#include "dysp/adf.hpp"
#include "dysp/config.hpp"
#include "dysp/conflict.hpp"
#include "dysp/fevd.hpp"
#include "dysp/network.hpp"
#include "dysp/panel.hpp"
#include "dysp/pipeline.hpp"
#include "dysp/quantreg.hpp"
#include "dysp/regression.hpp"
#include "dysp/sea.hpp"
#include "dysp/spillover.hpp"
#include "dysp/var.hpp"
#include "dysp/year_series.hpp"
