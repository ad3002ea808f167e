// Copyright 2026 the sparsewalk authors.
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

#ifndef SPARSEWALK_SPARSEWALK_HPP_
#define SPARSEWALK_SPARSEWALK_HPP_

#include "sparsewalk/analytics.hpp"
#include "sparsewalk/branching.hpp"
#include "sparsewalk/critgw.hpp"
#include "sparsewalk/env.hpp"
#include "sparsewalk/env_io.hpp"
#include "sparsewalk/error.hpp"
#include "sparsewalk/harness.hpp"
#include "sparsewalk/parallel.hpp"
#include "sparsewalk/rng.hpp"
#include "sparsewalk/stable.hpp"
#include "sparsewalk/stats.hpp"
#include "sparsewalk/walk.hpp"

#endif  // SPARSEWALK_SPARSEWALK_HPP_
