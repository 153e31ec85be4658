#pragma once

// Umbrella header: the whole toolkit.

#include "oodkit/common.hpp"
#include "oodkit/rng.hpp"
#include "oodkit/matrix.hpp"
#include "oodkit/nn.hpp"
#include "oodkit/data.hpp"
#include "oodkit/train.hpp"
#include "oodkit/model_io.hpp"
#include "oodkit/detect.hpp"
#include "oodkit/metrics.hpp"
#include "oodkit/bench.hpp"
#include "oodkit/selftest.hpp"
