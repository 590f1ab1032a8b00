/*
 * Copyright 2026 The swmt Authors.
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

// Everything in the library except the command-line front end.

#include "swmt/checkpoint.hpp"
#include "swmt/codec.hpp"
#include "swmt/config.hpp"
#include "swmt/data.hpp"
#include "swmt/error.hpp"
#include "swmt/evalkit.hpp"
#include "swmt/gradcheck.hpp"
#include "swmt/labels.hpp"
#include "swmt/losses.hpp"
#include "swmt/model.hpp"
#include "swmt/stats.hpp"
#include "swmt/tensorcore.hpp"
#include "swmt/train.hpp"
