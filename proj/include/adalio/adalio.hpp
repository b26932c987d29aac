#pragma once

#include "adalio/degeneracy.hpp"
#include "adalio/error.hpp"
#include "adalio/eskf.hpp"
#include "adalio/geometry.hpp"
#include "adalio/io.hpp"
#include "adalio/pipeline.hpp"
#include "adalio/plane.hpp"
#include "adalio/presets.hpp"
#include "adalio/scoring.hpp"
#include "adalio/state.hpp"
#include "adalio/synth.hpp"
#include "adalio/tum.hpp"
#include "adalio/voxel_map.hpp"
