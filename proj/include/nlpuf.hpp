#pragma once

#include "nlpuf/challenge.hpp"
#include "nlpuf/combinatorics.hpp"
#include "nlpuf/common.hpp"
#include "nlpuf/config.hpp"
#include "nlpuf/crossbar.hpp"
#include "nlpuf/device.hpp"
#include "nlpuf/environment.hpp"
#include "nlpuf/experiment.hpp"
#include "nlpuf/metrics.hpp"
#include "nlpuf/nlrpuf.hpp"
#include "nlpuf/response.hpp"
#include "nlpuf/tuning.hpp"
