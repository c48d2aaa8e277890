/*
 * Copyright 2026 The wmnsec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "wmn/anonake.hpp"
#include "wmn/bigint.hpp"
#include "wmn/hash.hpp"
#include "wmn/keysched.hpp"
#include "wmn/meshsim/simulator.hpp"
#include "wmn/numtheory.hpp"
#include "wmn/permute.hpp"
#include "wmn/prg.hpp"
#include "wmn/ringsig.hpp"
#include "wmn/selftest.hpp"
#include "wmn/simtime.hpp"
#include "wmn/wire.hpp"
