#pragma once

#include "hca/analysis.hpp"
#include "hca/environments.hpp"
#include "hca/errors.hpp"
#include "hca/estimators.hpp"
#include "hca/mdp.hpp"
#include "hca/oracle.hpp"
#include "hca/perturbation.hpp"
#include "hca/random.hpp"
#include "hca/serialization.hpp"
#include "hca/tolerances.hpp"
#include "hca/trajectory.hpp"
