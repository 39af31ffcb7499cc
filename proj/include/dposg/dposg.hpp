#pragma once

// Umbrella header.
#include "dposg/common.hpp"
#include "dposg/config.hpp"
#include "dposg/decentralized.hpp"
#include "dposg/engine.hpp"
#include "dposg/metrics.hpp"
#include "dposg/oadam.hpp"
#include "dposg/osg.hpp"
#include "dposg/planner.hpp"
#include "dposg/plot.hpp"
#include "dposg/problems.hpp"
#include "dposg/rng.hpp"
#include "dposg/topology.hpp"
