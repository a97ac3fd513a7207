#pragma once

#include "mixmdp/clustering.hpp"
#include "mixmdp/core.hpp"
#include "mixmdp/em.hpp"
#include "mixmdp/error.hpp"
#include "mixmdp/estimators.hpp"
#include "mixmdp/experiment.hpp"
#include "mixmdp/harness.hpp"
#include "mixmdp/inference.hpp"
#include "mixmdp/io.hpp"
#include "mixmdp/metrics.hpp"
#include "mixmdp/parallel.hpp"
#include "mixmdp/rng.hpp"
#include "mixmdp/simulator.hpp"
#include "mixmdp/subspace.hpp"
