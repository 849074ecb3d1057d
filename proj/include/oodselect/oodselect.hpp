#pragma once

// Umbrella header.

#include "oodselect/baselines.hpp"
#include "oodselect/bit_matrix.hpp"
#include "oodselect/core_data.hpp"
#include "oodselect/error.hpp"
#include "oodselect/io.hpp"
#include "oodselect/parallel.hpp"
#include "oodselect/probit.hpp"
#include "oodselect/rng.hpp"
#include "oodselect/selector.hpp"
#include "oodselect/serialize.hpp"
#include "oodselect/stats.hpp"
#include "oodselect/sweep.hpp"
#include "oodselect/synth.hpp"
