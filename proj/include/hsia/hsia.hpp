#pragma once

#include "hsia/attacks.hpp"
#include "hsia/binary_io.hpp"
#include "hsia/config.hpp"
#include "hsia/cube_io.hpp"
#include "hsia/errors.hpp"
#include "hsia/layers.hpp"
#include "hsia/metrics.hpp"
#include "hsia/model.hpp"
#include "hsia/model_io.hpp"
#include "hsia/patches.hpp"
#include "hsia/pca.hpp"
#include "hsia/pipeline.hpp"
#include "hsia/random.hpp"
#include "hsia/scene.hpp"
#include "hsia/tensor.hpp"
#include "hsia/train.hpp"
