#pragma once

#include "bias.hpp"
#include "commodity.hpp"
#include "engine.hpp"
#include "experiment.hpp"
#include "linkrate.hpp"
#include "metrics.hpp"
#include "netgen.hpp"
#include "queueing.hpp"
#include "rng.hpp"
#include "scheduler.hpp"
#include "traffic.hpp"
#include "types.hpp"
