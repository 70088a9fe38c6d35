#pragma once

// Umbrella header.

#include "rgc/conv.hpp"
#include "rgc/errors.hpp"
#include "rgc/experiment.hpp"
#include "rgc/finite_group.hpp"
#include "rgc/gconv.hpp"
#include "rgc/gradcheck.hpp"
#include "rgc/grid_transform.hpp"
#include "rgc/io.hpp"
#include "rgc/models.hpp"
#include "rgc/optim.hpp"
#include "rgc/random.hpp"
#include "rgc/runtime.hpp"
#include "rgc/symmetry_probe.hpp"
#include "rgc/tasks.hpp"
#include "rgc/tensor.hpp"
#include "rgc/train.hpp"
