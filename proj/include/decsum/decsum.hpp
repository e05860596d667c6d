#pragma once

#include "decsum/baselines.hpp"
#include "decsum/corpus.hpp"
#include "decsum/errors.hpp"
#include "decsum/eval.hpp"
#include "decsum/external_client.hpp"
#include "decsum/losses.hpp"
#include "decsum/scoring.hpp"
#include "decsum/selector.hpp"
