#pragma once

#include "feasibility/geometry.hpp"
#include "feasibility/affine.hpp"
#include "feasibility/operators.hpp"
#include "feasibility/control.hpp"
#include "feasibility/engine.hpp"
#include "feasibility/diagnostics.hpp"
#include "feasibility/bench.hpp"
#include "feasibility/config.hpp"
