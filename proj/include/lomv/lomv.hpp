#pragma once

// Umbrella header for the long-only minimum variance library.

#include "lomv/errors.hpp"
#include "lomv/numeric.hpp"
#include "lomv/factor_model.hpp"
#include "lomv/kkt.hpp"
#include "lomv/explicit_solver.hpp"
#include "lomv/active_set.hpp"
#include "lomv/hyperplane.hpp"
#include "lomv/panel.hpp"
#include "lomv/estimators.hpp"
#include "lomv/oracle.hpp"
#include "lomv/io.hpp"
#include "lomv/pipeline.hpp"
