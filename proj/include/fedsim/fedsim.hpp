#pragma once

#include "fedsim/baselines.hpp"
#include "fedsim/cost_model.hpp"
#include "fedsim/estimators.hpp"
#include "fedsim/experiment.hpp"
#include "fedsim/icgm.hpp"
#include "fedsim/logistic.hpp"
#include "fedsim/problem.hpp"
#include "fedsim/quadratic.hpp"
#include "fedsim/trace.hpp"
#include "fedsim/verification.hpp"
