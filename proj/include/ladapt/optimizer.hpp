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

#ifndef LADAPT_OPTIMIZER_HPP_
#define LADAPT_OPTIMIZER_HPP_

#include <string>
#include <unordered_map>
#include <vector>

#include "ladapt/autodiff.hpp"
#include "ladapt/params.hpp"

namespace ladapt {

struct SgdOptions {
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

/// Classical-momentum SGD with weight decay folded into the gradient:
///   v <- momentum * v + (grad + weight_decay * param)
///   param <- param - lr * v
/// Momentum buffers start at zero and are keyed by parameter name.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdOptions options = {}) : opt_(options) {
    if (opt_.lr < 0 || opt_.momentum < 0 || opt_.weight_decay < 0) {
      throw ConfigError("sgd: negative hyperparameter");
    }
  }

  const SgdOptions& options() const { return opt_; }

  void step_one(Param& p, const Tensor& grad) {
    if (!grad.same_shape(p.value)) {
      throw ShapeError("sgd_step: gradient shape " + shape_str(grad.shape()) +
                       " != parameter '" + p.name + "' shape " +
                       shape_str(p.value.shape()));
    }
    Tensor& v = velocity_.try_emplace(p.name, Tensor(p.value.shape()))
                    .first->second;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double update = grad[i] + opt_.weight_decay * p.value[i];
      v[i] = opt_.momentum * v[i] + update;
      p.value[i] -= opt_.lr * v[i];
    }
  }

  /// Applies one update to every parameter, reading gradients off the tape
  /// through the leaf ids the parameters were bound to.
  void step(std::vector<Param>& params, const std::vector<NodeId>& bound,
            const GradientMap& grads, const Graph& g) {
    if (params.size() != bound.size()) {
      throw Error("sgd_step: " + std::to_string(params.size()) +
                  " parameters but " + std::to_string(bound.size()) +
                  " bound nodes");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (!grads.contains(bound[i])) {
        throw Error("sgd_step: missing gradient for parameter '" +
                    params[i].name + "'");
      }
      step_one(params[i], grads.tensor(g, bound[i]));
    }
  }

  /// Momentum buffer for a parameter, or nullptr before its first step.
  const Tensor* velocity(const std::string& name) const {
    auto it = velocity_.find(name);
    return it == velocity_.end() ? nullptr : &it->second;
  }

 private:
  SgdOptions opt_;
  std::unordered_map<std::string, Tensor> velocity_;
};

}  // namespace ladapt

#endif  // LADAPT_OPTIMIZER_HPP_
