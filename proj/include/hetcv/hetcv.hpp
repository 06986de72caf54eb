#pragma once

// Umbrella header for the hetcv library.

#include "hetcv/numerics.hpp"
#include "hetcv/meta_core.hpp"
#include "hetcv/measures.hpp"
#include "hetcv/intervals.hpp"
#include "hetcv/simulator.hpp"
#include "hetcv/ingest.hpp"
#include "hetcv/report.hpp"
#include "hetcv/config.hpp"
