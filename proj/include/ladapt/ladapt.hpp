/* Copyright 2026 The ladapt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef LADAPT_LADAPT_HPP_
#define LADAPT_LADAPT_HPP_

#include "ladapt/autodiff.hpp"
#include "ladapt/data.hpp"
#include "ladapt/errors.hpp"
#include "ladapt/experiment.hpp"
#include "ladapt/gradcheck.hpp"
#include "ladapt/graph.hpp"
#include "ladapt/heads.hpp"
#include "ladapt/layers.hpp"
#include "ladapt/metrics.hpp"
#include "ladapt/optimizer.hpp"
#include "ladapt/params.hpp"
#include "ladapt/rng.hpp"
#include "ladapt/tensor.hpp"
#include "ladapt/tensor_io.hpp"
#include "ladapt/trainer.hpp"

#endif  // LADAPT_LADAPT_HPP_
