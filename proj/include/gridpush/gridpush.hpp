#pragma once

#include "gridpush/body_model.hpp"
#include "gridpush/box_qp.hpp"
#include "gridpush/common.hpp"
#include "gridpush/constrained_inverse.hpp"
#include "gridpush/contour.hpp"
#include "gridpush/diff_engine.hpp"
#include "gridpush/geometry.hpp"
#include "gridpush/identification.hpp"
#include "gridpush/io.hpp"
#include "gridpush/lcp_dynamics.hpp"
#include "gridpush/pipeline.hpp"
#include "gridpush/planner.hpp"
#include "gridpush/trajectory.hpp"
