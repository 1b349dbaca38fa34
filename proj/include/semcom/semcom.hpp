#pragma once

#include "semcom/experiment.hpp"
#include "semcom/plot.hpp"
#include "semcom/prob_semantics.hpp"
#include "semcom/synthetic.hpp"
#include "semcom/verify.hpp"
