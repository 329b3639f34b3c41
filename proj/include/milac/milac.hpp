#pragma once

#include "milac/error.hpp"
#include "milac/linalg.hpp"
#include "milac/microwave.hpp"
#include "milac/channels.hpp"
#include "milac/evaluation.hpp"
#include "milac/optimizer.hpp"
#include "milac/baselines.hpp"
#include "milac/experiment.hpp"
