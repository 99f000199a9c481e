#pragma once

#include "dime/analysis.hpp"
#include "dime/budget.hpp"
#include "dime/error.hpp"
#include "dime/executor.hpp"
#include "dime/guest.hpp"
#include "dime/harness.hpp"
#include "dime/interval_set.hpp"
#include "dime/program.hpp"
#include "dime/redundancy_log.hpp"
#include "dime/region.hpp"
#include "dime/trace.hpp"
