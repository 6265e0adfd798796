// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "msmix/backbone.hpp"
#include "msmix/checkpoint.hpp"
#include "msmix/config.hpp"
#include "msmix/dataset.hpp"
#include "msmix/error.hpp"
#include "msmix/finite_diff.hpp"
#include "msmix/intensity.hpp"
#include "msmix/losses.hpp"
#include "msmix/matrix.hpp"
#include "msmix/metrics.hpp"
#include "msmix/mixing.hpp"
#include "msmix/modality.hpp"
#include "msmix/objective.hpp"
#include "msmix/rng.hpp"
#include "msmix/sass.hpp"
#include "msmix/trainer.hpp"
