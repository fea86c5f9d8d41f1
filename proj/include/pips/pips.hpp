#pragma once

#include "pips/chain_analysis.hpp"
#include "pips/finite_horizon.hpp"
#include "pips/fixtures.hpp"
#include "pips/mdp.hpp"
#include "pips/online.hpp"
#include "pips/policy_switching.hpp"
