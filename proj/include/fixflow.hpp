// Copyright 2026 The fixflow Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header.

#pragma once

#include "fixflow/codegen.hpp"
#include "fixflow/dataset.hpp"
#include "fixflow/errors.hpp"
#include "fixflow/estimator.hpp"
#include "fixflow/fixed_point.hpp"
#include "fixflow/kernels.hpp"
#include "fixflow/model_ir.hpp"
#include "fixflow/passes.hpp"
#include "fixflow/profiler.hpp"
#include "fixflow/pruning.hpp"
#include "fixflow/rng.hpp"
#include "fixflow/scan.hpp"
#include "fixflow/trainer.hpp"
#include "fixflow/version.hpp"
