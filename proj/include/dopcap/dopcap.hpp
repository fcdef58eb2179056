// SPDX-License-Identifier: Apache-2.0
//
// dopcap - capacity bounds for Doppler-impaired OFDM channels
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

#include "dopcap/alignment.hpp"
#include "dopcap/channel_core.hpp"
#include "dopcap/duality_ub.hpp"
#include "dopcap/gaussian_bounds.hpp"
#include "dopcap/linalg.hpp"
#include "dopcap/matrix_io.hpp"
#include "dopcap/mc_engine.hpp"
#include "dopcap/ofdm_doppler.hpp"
#include "dopcap/sweep.hpp"
#include "dopcap/validate.hpp"
