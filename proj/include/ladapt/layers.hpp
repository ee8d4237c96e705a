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

#ifndef LADAPT_LAYERS_HPP_
#define LADAPT_LAYERS_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ladapt/autodiff.hpp"
#include "ladapt/graph.hpp"
#include "ladapt/params.hpp"
#include "ladapt/rng.hpp"

namespace ladapt {

enum class LayerKind : std::uint8_t {
  kDense,
  kConv1x1,
  kConv3x3,
  kRelu,
  kBatchNorm,
  kGlobalAvgPool,
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv1x1: return "conv1x1";
    case LayerKind::kConv3x3: return "conv3x3";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kGlobalAvgPool: return "global-avg-pool";
  }
  return "?";
}

/// One layer of the feature extractor. `width` is the output width/channel
/// count for dense and conv layers and ignored (0) for the rest. A layer
/// with `tap` set exposes its squeezed output to the adaptation heads.
struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  std::size_t width = 0;
  bool tap = false;
};

/// A tapped layer: its index in the feature stack and the channel count of
/// the squeezed vector it exposes.
struct TapInfo {
  std::size_t layer = 0;
  std::size_t channels = 0;
};

/// Squeeze transform: global average pooling of a feature map to one value
/// per channel. Accepts [H,W,C] or batched [N,H,W,C].
inline NodeId squeeze(Graph& g, NodeId x) {
  std::size_t r = g.value(x).rank();
  if (r != 3 && r != 4) {
    throw ShapeError("squeeze: expects rank 3 or 4, got " +
                     shape_str(g.shape(x)));
  }
  return g.global_avg_pool(x);
}

/// Feature extractor plus label classifier, with no bias terms anywhere
/// (batchnorm beta provides shifts where configured). The classifier is a
/// dense stack on the squeezed vector of the final feature layer.
///
/// Parameters live in the model; bind() copies their current values onto a
/// tape as leaves, run() records the forward pass. Batchnorm keeps running
/// statistics (momentum 0.1) for evaluation mode.
class Model {
 public:
  Model(Shape input_shape, std::vector<LayerSpec> features,
        std::vector<std::size_t> classifier_hidden, std::size_t n_classes,
        std::uint64_t seed)
      : input_shape_(std::move(input_shape)),
        n_classes_(n_classes),
        features_spec_(features),
        classifier_hidden_(classifier_hidden) {
    if (n_classes_ < 2) {
      throw ConfigError("Model: need at least 2 classes, got " +
                        std::to_string(n_classes_));
    }
    if (input_shape_.size() != 1 && input_shape_.size() != 3) {
      throw ShapeError("Model: input shape must be [d] or [H,W,C], got " +
                       shape_str(input_shape_));
    }
    Pcg32 rng(seed, rng_stream::kModelInit);
    Shape cur = input_shape_;
    for (std::size_t i = 0; i < features.size(); ++i) {
      cur = plan_layer(features[i], cur, "f" + std::to_string(i), rng);
      plans_.push_back({features[i], static_cast<int>(last_param_),
                        static_cast<int>(last_bn_), cur});
      if (features[i].tap) {
        taps_.push_back({i, cur.back()});
      }
    }
    // Classifier input: squeezed vector of the final feature layer.
    std::size_t cls_in = cur.back();
    std::size_t prev = cls_in;
    for (std::size_t i = 0; i < classifier_hidden.size(); ++i) {
      std::size_t w = classifier_hidden[i];
      if (w == 0) throw ConfigError("Model: classifier width must be positive");
      add_param("c" + std::to_string(i) + ".w",
                glorot_uniform({prev, w}, prev, w, rng));
      cls_params_.push_back(params_.size() - 1);
      prev = w;
    }
    add_param("c_out.w", glorot_uniform({prev, n_classes_}, prev, n_classes_, rng));
    cls_params_.push_back(params_.size() - 1);
  }

  const Shape& input_shape() const { return input_shape_; }
  std::size_t n_classes() const { return n_classes_; }
  const std::vector<TapInfo>& taps() const { return taps_; }
  const std::vector<LayerSpec>& features() const { return features_spec_; }
  const std::vector<std::size_t>& classifier_hidden() const {
    return classifier_hidden_;
  }

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Param& p : params_) n += p.value.size();
    return n;
  }

  /// Closed-form parameter count for a configuration; the constructor's
  /// enumeration must agree with this.
  static std::size_t parameter_count_formula(
      const Shape& input, const std::vector<LayerSpec>& features,
      const std::vector<std::size_t>& classifier_hidden,
      std::size_t n_classes) {
    std::size_t n = 0;
    std::size_t ch = input.back();
    for (const LayerSpec& l : features) {
      switch (l.kind) {
        case LayerKind::kDense:
        case LayerKind::kConv1x1:
          n += ch * l.width;
          ch = l.width;
          break;
        case LayerKind::kConv3x3:
          n += 9 * ch * l.width;
          ch = l.width;
          break;
        case LayerKind::kBatchNorm:
          n += 2 * ch;
          break;
        case LayerKind::kRelu:
        case LayerKind::kGlobalAvgPool:
          break;
      }
    }
    std::size_t prev = ch;
    for (std::size_t w : classifier_hidden) {
      n += prev * w;
      prev = w;
    }
    return n + prev * n_classes;
  }

  struct Binding {
    std::vector<NodeId> param_ids;  // parallel to params()
  };

  struct Forward {
    NodeId logits;
    std::vector<NodeId> taps;  // squeezed [B, C_i], one per tapped layer
  };

  Binding bind(Graph& g, bool trainable) const {
    Binding b;
    b.param_ids.reserve(params_.size());
    for (const Param& p : params_) {
      b.param_ids.push_back(g.leaf(p.value, trainable, p.name));
    }
    return b;
  }

  /// Records the forward pass for a batch. `training` selects batch
  /// statistics for batchnorm; `update_stats` additionally folds them into
  /// the running averages (only meaningful while training).
  Forward run(Graph& g, const Binding& b, NodeId input, bool training,
              bool update_stats) {
    const Tensor& in = g.value(input);
    Shape expect = input_shape_;
    expect.insert(expect.begin(), in.dim(0));
    if (in.shape() != expect) {
      throw ShapeError("Model: input " + shape_str(in.shape()) +
                       " does not match [batch]+" + shape_str(input_shape_));
    }
    Forward f;
    NodeId act = input;
    for (std::size_t i = 0; i < plans_.size(); ++i) {
      const LayerPlan& plan = plans_[i];
      try {
        act = run_layer(g, b, plan, act, training, update_stats);
      } catch (const ShapeError& e) {
        throw ShapeError("layer f" + std::to_string(i) + " (" +
                         layer_kind_name(plan.spec.kind) + "): " + e.what());
      }
      if (plan.spec.tap) {
        f.taps.push_back(g.value(act).rank() == 2 ? act : squeeze(g, act));
      }
    }
    NodeId cls = g.value(act).rank() == 2 ? act : squeeze(g, act);
    for (std::size_t idx : cls_params_) {
      cls = g.matmul(cls, b.param_ids[idx]);
      if (idx != cls_params_.back()) cls = g.relu(cls);
    }
    f.logits = cls;
    return f;
  }

  /// Convenience: bind and run in one step (parameters bound non-trainable).
  Forward forward(Graph& g, NodeId input, bool training) {
    Binding b = bind(g, /*trainable=*/false);
    return run(g, b, input, training, /*update_stats=*/false);
  }

  struct State {
    std::vector<Param> params;
    std::vector<Tensor> bn_mean, bn_var;
  };

  State state() const {
    State s;
    s.params = params_;
    for (const BnState& b : bn_) {
      s.bn_mean.push_back(b.mean);
      s.bn_var.push_back(b.var);
    }
    return s;
  }

  void set_state(const State& s) {
    if (s.params.size() != params_.size() || s.bn_mean.size() != bn_.size()) {
      throw Error("Model: snapshot does not match architecture");
    }
    params_ = s.params;
    for (std::size_t i = 0; i < bn_.size(); ++i) {
      bn_[i].mean = s.bn_mean[i];
      bn_[i].var = s.bn_var[i];
    }
  }

 private:
  struct BnState {
    Tensor mean, var;
  };

  struct LayerPlan {
    LayerSpec spec;
    int param_index;  // -1 when the layer has no weights
    int bn_index;     // -1 unless batchnorm
    Shape out_shape;  // per-sample
  };

  void add_param(std::string name, Tensor value) {
    params_.push_back({std::move(name), std::move(value)});
  }

  /// Validates one layer against the running per-sample shape, creates its
  /// parameters, and returns the output shape.
  Shape plan_layer(const LayerSpec& spec, const Shape& cur,
                   const std::string& name, Pcg32& rng) {
    last_param_ = static_cast<std::size_t>(-1);
    last_bn_ = static_cast<std::size_t>(-1);
    switch (spec.kind) {
      case LayerKind::kDense: {
        require(spec.width > 0, name, "dense width must be positive");
        require(cur.size() == 1, name,
                "dense expects a vector input, got " + shape_str(cur));
        add_param(name + ".w",
                  glorot_uniform({cur[0], spec.width}, cur[0], spec.width, rng));
        last_param_ = params_.size() - 1;
        return {spec.width};
      }
      case LayerKind::kConv1x1: {
        require(spec.width > 0, name, "conv1x1 width must be positive");
        require(cur.size() == 3, name,
                "conv1x1 expects [H,W,C] input, got " + shape_str(cur));
        add_param(name + ".k",
                  glorot_uniform({cur[2], spec.width}, cur[2], spec.width, rng));
        last_param_ = params_.size() - 1;
        return {cur[0], cur[1], spec.width};
      }
      case LayerKind::kConv3x3: {
        require(spec.width > 0, name, "conv3x3 width must be positive");
        require(cur.size() == 3, name,
                "conv3x3 expects [H,W,C] input, got " + shape_str(cur));
        require(cur[0] >= 3 && cur[1] >= 3, name,
                "conv3x3 needs spatial extents >= 3, got " + shape_str(cur));
        add_param(name + ".k",
                  glorot_uniform({3, 3, cur[2], spec.width}, 9 * cur[2],
                                 9 * spec.width, rng));
        last_param_ = params_.size() - 1;
        return {cur[0] - 2, cur[1] - 2, spec.width};
      }
      case LayerKind::kRelu:
        return cur;
      case LayerKind::kBatchNorm: {
        std::size_t ch = cur.back();
        add_param(name + ".gamma", Tensor::filled({ch}, 1.0));
        last_param_ = params_.size() - 1;
        add_param(name + ".beta", Tensor({ch}));
        bn_.push_back({Tensor({ch}), Tensor::filled({ch}, 1.0)});
        last_bn_ = bn_.size() - 1;
        return cur;
      }
      case LayerKind::kGlobalAvgPool:
        require(cur.size() == 3, name,
                "global-avg-pool expects [H,W,C] input, got " + shape_str(cur));
        return {cur[2]};
    }
    throw Error("Model: unknown layer kind");
  }

  static void require(bool ok, const std::string& name,
                      const std::string& msg) {
    if (!ok) throw ShapeError("layer " + name + ": " + msg);
  }

  NodeId run_layer(Graph& g, const Binding& b, const LayerPlan& plan,
                   NodeId act, bool training, bool update_stats) {
    switch (plan.spec.kind) {
      case LayerKind::kDense:
        return g.matmul(act, b.param_ids[plan.param_index]);
      case LayerKind::kConv1x1:
        return g.conv1x1(act, b.param_ids[plan.param_index]);
      case LayerKind::kConv3x3:
        return g.conv3x3(act, b.param_ids[plan.param_index]);
      case LayerKind::kRelu:
        return g.relu(act);
      case LayerKind::kGlobalAvgPool:
        return g.global_avg_pool(act);
      case LayerKind::kBatchNorm: {
        NodeId gamma = b.param_ids[plan.param_index];
        NodeId beta = b.param_ids[plan.param_index + 1];
        if (training) {
          NodeId out = g.batchnorm(act, gamma, beta);
          if (update_stats) update_running_stats(g, act, plan.bn_index);
          return out;
        }
        BnState& s = bn_[plan.bn_index];
        return g.batchnorm_eval(act, gamma, beta, g.constant(s.mean),
                                g.constant(s.var));
      }
    }
    throw Error("Model: unknown layer kind");
  }

  void update_running_stats(const Graph& g, NodeId act, int bn_index) {
    const Tensor& X = g.value(act);
    auto [rows, C] = Graph::bn_dims(X);
    std::vector<double> mean(C), var(C);
    Graph::bn_batch_stats(X, rows, C, mean, var);
    BnState& s = bn_[bn_index];
    for (std::size_t c = 0; c < C; ++c) {
      s.mean[c] = 0.9 * s.mean[c] + 0.1 * mean[c];
      s.var[c] = 0.9 * s.var[c] + 0.1 * var[c];
    }
  }

  Shape input_shape_;
  std::size_t n_classes_;
  std::vector<LayerSpec> features_spec_;
  std::vector<std::size_t> classifier_hidden_;
  std::vector<Param> params_;
  std::vector<LayerPlan> plans_;
  std::vector<std::size_t> cls_params_;
  std::vector<TapInfo> taps_;
  std::vector<BnState> bn_;
  std::size_t last_param_ = static_cast<std::size_t>(-1);
  std::size_t last_bn_ = static_cast<std::size_t>(-1);
};

}  // namespace ladapt

#endif  // LADAPT_LAYERS_HPP_
