// SPDX-License-Identifier: Apache-2.0
//
// covest: covariance estimation for massive MIMO uplink training
// Copyright (C) 2026 The covest authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "covest/adaptive.hpp"
#include "covest/channel.hpp"
#include "covest/cholesky.hpp"
#include "covest/config.hpp"
#include "covest/estimators.hpp"
#include "covest/experiment.hpp"
#include "covest/link_level.hpp"
#include "covest/rng.hpp"
#include "covest/scenario.hpp"
#include "covest/schedule.hpp"
#include "covest/types.hpp"
