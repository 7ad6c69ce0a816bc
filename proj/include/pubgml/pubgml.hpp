#pragma once

#include "cli.hpp"
#include "config.hpp"
#include "design.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "featsel.hpp"
#include "features.hpp"
#include "forest.hpp"
#include "gbm.hpp"
#include "linalg.hpp"
#include "log.hpp"
#include "m5p.hpp"
#include "metrics.hpp"
#include "mlp.hpp"
#include "models.hpp"
#include "parallel.hpp"
#include "stats.hpp"
#include "synth.hpp"
#include "table.hpp"
