// Copyright 2026 The vpe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Umbrella header. http.hpp is left out; include it where the transports are
// needed.

#include "vpe/backprop.hpp"
#include "vpe/catalog.hpp"
#include "vpe/common.hpp"
#include "vpe/compiler.hpp"
#include "vpe/dataset.hpp"
#include "vpe/engine.hpp"
#include "vpe/executor.hpp"
#include "vpe/gateway.hpp"
#include "vpe/ideation.hpp"
#include "vpe/image.hpp"
#include "vpe/landscape.hpp"
#include "vpe/nuct.hpp"
#include "vpe/program.hpp"
#include "vpe/prompts.hpp"
#include "vpe/raster.hpp"
#include "vpe/record.hpp"
#include "vpe/tools.hpp"
#include "vpe/tree.hpp"
#include "vpe/types.hpp"
