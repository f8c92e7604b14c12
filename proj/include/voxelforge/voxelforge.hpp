#pragma once

#include "voxelforge/augment.hpp"
#include "voxelforge/augment_json.hpp"
#include "voxelforge/autolabel.hpp"
#include "voxelforge/bench.hpp"
#include "voxelforge/components.hpp"
#include "voxelforge/error.hpp"
#include "voxelforge/fftmorph.hpp"
#include "voxelforge/grid.hpp"
#include "voxelforge/io.hpp"
#include "voxelforge/lossverify.hpp"
#include "voxelforge/noise.hpp"
#include "voxelforge/parallel.hpp"
#include "voxelforge/phantom.hpp"
#include "voxelforge/pipeline.hpp"
#include "voxelforge/random.hpp"
#include "voxelforge/resample.hpp"
#include "voxelforge/segloss.hpp"
#include "voxelforge/threshold.hpp"
#include "voxelforge/tiling.hpp"
