// Copyright 2026 The EAS Authors
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

#pragma once

// Umbrella header.

#include "eas/archive.hpp"
#include "eas/dataset.hpp"
#include "eas/echo_task.hpp"
#include "eas/error.hpp"
#include "eas/metrics.hpp"
#include "eas/model.hpp"
#include "eas/pipeline.hpp"
#include "eas/profiler.hpp"
#include "eas/random.hpp"
#include "eas/report.hpp"
#include "eas/run_config.hpp"
#include "eas/search.hpp"
#include "eas/sparsifier.hpp"
#include "eas/tensor.hpp"
