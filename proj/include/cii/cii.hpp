#pragma once

#include "cii/common.hpp"
#include "cii/estimators.hpp"
#include "cii/io.hpp"
#include "cii/markov.hpp"
#include "cii/state_model.hpp"
#include "cii/tables.hpp"
#include "cii/valuation.hpp"
