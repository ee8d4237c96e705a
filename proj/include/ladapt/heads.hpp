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

#ifndef LADAPT_HEADS_HPP_
#define LADAPT_HEADS_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ladapt/autodiff.hpp"
#include "ladapt/graph.hpp"
#include "ladapt/params.hpp"
#include "ladapt/rng.hpp"

namespace ladapt {

/// Gradient reversal configuration. The reversed gradient is multiplied by
/// `scale`; the default of 1 applies no extra scaling or annealing, the
/// knob exists for ablations.
struct GrlConfig {
  double scale = 1.0;
};

/// Identity forward; multiplies the upstream gradient by -scale backward.
inline NodeId grl(Graph& g, NodeId z, const GrlConfig& cfg = {}) {
  return g.grl(z, cfg.scale);
}

/// Per-layer domain classifier / critic: two bias-free 1x1 convolutions with
/// a ReLU between them, applied to the squeezed vector of a tapped layer
/// (on a 1x1 spatial map a 1x1 convolution is exactly a matrix product).
///
///   z [C'] -> W1 [C' x ceil(C'/r)] -> relu -> W2 [ceil(C'/r) x N']
///
/// In domain-classifier mode N' is the number of domains; in critic mode
/// N' = C' and the scalar critic value is the mean of the N' outputs.
class DomainHead {
 public:
  DomainHead(std::size_t layer_index, std::size_t input_width,
             double reduction, std::size_t outputs, std::uint64_t seed)
      : layer_index_(layer_index),
        input_width_(input_width),
        hidden_(hidden_width(input_width, reduction)),
        outputs_(outputs) {
    if (input_width_ == 0 || outputs_ == 0) {
      throw ConfigError("DomainHead: zero width");
    }
    Pcg32 rng(seed, rng_stream::kHeadBase + layer_index);
    std::string prefix = "d" + std::to_string(layer_index) + ".";
    params_.push_back({prefix + "w1",
                       glorot_uniform({input_width_, hidden_}, input_width_,
                                      hidden_, rng)});
    params_.push_back({prefix + "w2",
                       glorot_uniform({hidden_, outputs_}, hidden_, outputs_,
                                      rng)});
  }

  /// ceil(C'/r), at least 1 so small taps stay valid.
  static std::size_t hidden_width(std::size_t channels, double reduction) {
    if (reduction <= 0) throw ConfigError("DomainHead: reduction must be > 0");
    double h = std::ceil(static_cast<double>(channels) / reduction - 1e-12);
    return h < 1.0 ? 1 : static_cast<std::size_t>(h);
  }

  std::size_t layer_index() const { return layer_index_; }
  std::size_t input_width() const { return input_width_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t outputs() const { return outputs_; }

  std::size_t parameter_count() const {
    return input_width_ * hidden_ + hidden_ * outputs_;
  }

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

  struct Binding {
    NodeId w1, w2;
    std::size_t outputs = 0;
  };

  Binding bind(Graph& g, bool trainable) const {
    return {g.leaf(params_[0].value, trainable, params_[0].name),
            g.leaf(params_[1].value, trainable, params_[1].name), outputs_};
  }

  std::vector<NodeId> bound_ids(const Binding& b) const { return {b.w1, b.w2}; }

 private:
  std::size_t layer_index_, input_width_, hidden_, outputs_;
  std::vector<Param> params_;
};

/// Head forward: W2^T relu(W1^T z). Accepts z as [C'] (viewed as one row)
/// or batched [B, C']; returns [B, N'].
inline NodeId domain_head_forward(Graph& g, const DomainHead::Binding& head,
                                  NodeId z) {
  const Tensor& zv = g.value(z);
  if (zv.rank() == 1) {
    z = g.reshape(z, {1, zv.dim(0)});
  } else if (zv.rank() != 2) {
    throw ShapeError("domain_head_forward: expects [C'] or [B, C'], got " +
                     shape_str(zv.shape()));
  }
  return g.matmul(g.relu(g.matmul(z, head.w1)), head.w2);
}

/// Per-sample scalar critic values: the mean of the N' head outputs, [B].
inline NodeId critic_values(Graph& g, const DomainHead::Binding& head,
                            NodeId z) {
  NodeId out = domain_head_forward(g, head, z);
  double inv = 1.0 / static_cast<double>(g.shape(out)[1]);
  return g.mul_scalar(g.row_sum(out), inv);
}

/// Critic distance estimate mean D(z_s) - mean D(z_t), a [1] node.
inline NodeId critic_estimate(Graph& g, const DomainHead::Binding& head,
                              NodeId z_s, NodeId z_t) {
  return g.subtract(g.mean(critic_values(g, head, z_s)),
                    g.mean(critic_values(g, head, z_t)));
}

/// Layer-wise domain-classification loss: for each tapped layer, the mean
/// softmax cross entropy of the head on reversed source and target squeezes
/// (source rows labeled `source_label`, target rows `target_label`), summed
/// unweighted across layers.
inline NodeId ldann_loss(Graph& g,
                         const std::vector<DomainHead::Binding>& heads,
                         const std::vector<NodeId>& taps_source,
                         const std::vector<NodeId>& taps_target,
                         const GrlConfig& cfg = {}, int source_label = 0,
                         int target_label = 1) {
  if (heads.size() != taps_source.size() ||
      heads.size() != taps_target.size() || heads.empty()) {
    throw ShapeError("ldann_loss: " + std::to_string(heads.size()) +
                     " heads vs " + std::to_string(taps_source.size()) + "/" +
                     std::to_string(taps_target.size()) + " taps");
  }
  NodeId total;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    NodeId ls = g.softmax_xent(
        domain_head_forward(g, heads[i], grl(g, taps_source[i], cfg)),
        std::vector<int>(g.shape(taps_source[i])[0], source_label));
    NodeId lt = g.softmax_xent(
        domain_head_forward(g, heads[i], grl(g, taps_target[i], cfg)),
        std::vector<int>(g.shape(taps_target[i])[0], target_label));
    NodeId layer = g.mul_scalar(g.add(ls, lt), 0.5);
    total = total.valid() ? g.add(total, layer) : layer;
  }
  return total;
}

/// Convex combination eps * z_s + (1 - eps) * z_t.
inline NodeId interpolate(Graph& g, NodeId z_s, NodeId z_t, double eps) {
  if (eps < 0.0 || eps > 1.0) {
    throw ConfigError("interpolate: eps must lie in [0, 1]");
  }
  if (g.shape(z_s) != g.shape(z_t)) {
    throw ShapeError("interpolate: shape mismatch " + shape_str(g.shape(z_s)) +
                     " vs " + shape_str(g.shape(z_t)));
  }
  return g.add(g.mul_scalar(z_s, eps), g.mul_scalar(z_t, 1.0 - eps));
}

/// Batched interpolation with one epsilon per row.
inline NodeId interpolate_batch(Graph& g, NodeId z_s, NodeId z_t,
                                const std::vector<double>& eps) {
  if (g.shape(z_s) != g.shape(z_t)) {
    throw ShapeError("interpolate: shape mismatch " + shape_str(g.shape(z_s)) +
                     " vs " + shape_str(g.shape(z_t)));
  }
  std::size_t rows = g.shape(z_s)[0];
  if (eps.size() != rows) {
    throw ShapeError("interpolate: " + std::to_string(eps.size()) +
                     " epsilons for " + std::to_string(rows) + " rows");
  }
  Tensor e({rows}), one_minus({rows});
  for (std::size_t i = 0; i < rows; ++i) {
    if (eps[i] < 0.0 || eps[i] > 1.0) {
      throw ConfigError("interpolate: eps must lie in [0, 1]");
    }
    e[i] = eps[i];
    one_minus[i] = 1.0 - eps[i];
  }
  return g.add(g.row_scale(z_s, g.constant(e)),
               g.row_scale(z_t, g.constant(one_minus)));
}

/// Gradient penalty lambda * mean_b (||grad_{z_b} D(z_b)||_2 - 1)^2. The
/// inner gradient is obtained from a recorded backward pass, so the result
/// stays differentiable with respect to the head parameters.
inline NodeId gradient_penalty(Graph& g, const DomainHead::Binding& head,
                               NodeId z_b, double lambda) {
  if (lambda < 0) throw ConfigError("gradient_penalty: lambda must be >= 0");
  const Tensor& zv = g.value(z_b);
  NodeId z2 = zv.rank() == 1 ? g.reshape(z_b, {1, zv.dim(0)}) : z_b;
  std::size_t rows = g.shape(z2)[0];
  // Sum of per-sample critic values; rows are independent, so the adjoint
  // of z2 holds every per-sample input gradient at once.
  NodeId total = g.sum(critic_values(g, head, z2));
  GradientMap inner = backward(g, total, std::vector<NodeId>{z2});
  NodeId norms = g.row_l2_norm(inner.node(z2));
  NodeId excess = g.subtract(norms, g.constant(Tensor::filled({rows}, 1.0)));
  return g.mul_scalar(g.mean(g.square(excess)), lambda);
}

/// Critic objective for one layer. Default is the established convention:
/// minimize -(D(z_s) - D(z_t)) + penalty. The literal mode descends
/// D(z_s) - D(z_t) - penalty instead, which also ascends the penalty; it is
/// kept behind the alg1_literal flag for comparison runs.
inline NodeId critic_loss(Graph& g, const DomainHead::Binding& head,
                          NodeId z_s, NodeId z_t, NodeId z_b, double lambda,
                          bool alg1_literal = false) {
  NodeId est = critic_estimate(g, head, z_s, z_t);
  NodeId gp = gradient_penalty(g, head, z_b, lambda);
  if (alg1_literal) {
    return g.subtract(est, gp);
  }
  return g.add(g.mul_scalar(est, -1.0), gp);
}

/// Adversarial term for the feature extractor under Wasserstein matching:
/// beta * sum_j (mean D_j(z_s) - mean D_j(z_t)). Head parameters must be
/// bound frozen so the distance gradient reaches only the feature extractor.
inline NodeId lwass_feature_loss(Graph& g,
                                 const std::vector<DomainHead::Binding>& heads,
                                 const std::vector<NodeId>& taps_source,
                                 const std::vector<NodeId>& taps_target,
                                 double beta) {
  if (heads.size() != taps_source.size() ||
      heads.size() != taps_target.size() || heads.empty()) {
    throw ShapeError("lwass_feature_loss: " + std::to_string(heads.size()) +
                     " heads vs " + std::to_string(taps_source.size()) + "/" +
                     std::to_string(taps_target.size()) + " taps");
  }
  NodeId total;
  for (std::size_t i = 0; i < heads.size(); ++i) {
    NodeId est = critic_estimate(g, heads[i], taps_source[i], taps_target[i]);
    total = total.valid() ? g.add(total, est) : est;
  }
  return g.mul_scalar(total, beta);
}

}  // namespace ladapt

#endif  // LADAPT_HEADS_HPP_
