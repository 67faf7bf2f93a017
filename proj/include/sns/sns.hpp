#pragma once

// Umbrella header.
#include "sns/bench.hpp"
#include "sns/cell_key.hpp"
#include "sns/config.hpp"
#include "sns/count_sketch.hpp"
#include "sns/errors.hpp"
#include "sns/harness.hpp"
#include "sns/hash.hpp"
#include "sns/heavy_hitters.hpp"
#include "sns/oracle.hpp"
#include "sns/pipeline.hpp"
#include "sns/point_io.hpp"
#include "sns/quantizer.hpp"
#include "sns/sketch_io.hpp"
#include "sns/summary.hpp"
#include "sns/zipf.hpp"
