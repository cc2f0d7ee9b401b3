#pragma once

#include "mrecon/error.hpp"
#include "mrecon/raster.hpp"
#include "mrecon/random.hpp"
#include "mrecon/camera.hpp"
#include "mrecon/transforms.hpp"
#include "mrecon/masked_points.hpp"
#include "mrecon/kinematics.hpp"
#include "mrecon/pnp.hpp"
#include "mrecon/losses.hpp"
#include "mrecon/gradient_check.hpp"
#include "mrecon/metrics.hpp"
#include "mrecon/raster_io.hpp"
#include "mrecon/scene.hpp"
#include "mrecon/bundle.hpp"
#include "mrecon/mock_predictor.hpp"
#include "mrecon/parallel.hpp"
