#pragma once

// Convenience header for the whole library.

#include "tsdid/csv.hpp"
#include "tsdid/dense_ols.hpp"
#include "tsdid/dgp.hpp"
#include "tsdid/error.hpp"
#include "tsdid/estimator.hpp"
#include "tsdid/fe_solver.hpp"
#include "tsdid/inference.hpp"
#include "tsdid/panel.hpp"
#include "tsdid/second_stage.hpp"
