#pragma once

// Umbrella header for the full library.

#include "feddp/baselines.hpp"
#include "feddp/bench.hpp"
#include "feddp/core.hpp"
#include "feddp/datagen.hpp"
#include "feddp/dp.hpp"
#include "feddp/fed.hpp"
#include "feddp/init.hpp"
#include "feddp/kmeans.hpp"
#include "feddp/linalg.hpp"
#include "feddp/lloyds.hpp"
#include "feddp/pipeline.hpp"
#include "feddp/rng.hpp"
#include "feddp/theory.hpp"
