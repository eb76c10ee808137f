// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rbstokes/errors.hpp"
#include "rbstokes/parameter.hpp"
#include "rbstokes/geometry.hpp"
#include "rbstokes/fe.hpp"
#include "rbstokes/fem_assembly.hpp"
#include "rbstokes/truth_solver.hpp"
#include "rbstokes/linalg.hpp"
#include "rbstokes/stability_constants.hpp"
#include "rbstokes/rb_core.hpp"
#include "rbstokes/error_estimation.hpp"
#include "rbstokes/sampling.hpp"
#include "rbstokes/io.hpp"
#include "rbstokes/database_io.hpp"
#include "rbstokes/workbench.hpp"
