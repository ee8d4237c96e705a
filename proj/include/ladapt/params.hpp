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

#ifndef LADAPT_PARAMS_HPP_
#define LADAPT_PARAMS_HPP_

#include <string>
#include <utility>

#include "ladapt/rng.hpp"
#include "ladapt/tensor.hpp"

namespace ladapt {

/// A named trainable tensor. Parameters live outside the tape; each training
/// step binds their current values as fresh leaves.
struct Param {
  std::string name;
  Tensor value;
};

/// Symmetric uniform init in +-sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(Shape shape, std::size_t fan_in,
                             std::size_t fan_out, Pcg32& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = rng.uniform(-limit, limit);
  }
  return t;
}

}  // namespace ladapt

#endif  // LADAPT_PARAMS_HPP_
